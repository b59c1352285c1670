use serde::{Deserialize, Serialize};

use super::ast::{Phase, PlanAst, Stmt};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Laser,
    Mw,
    Rf,
    Acq,
    /// Explicit waits; carries no state change.
    Delay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    LaserOn,
    LaserOff,
    MwOn { frequency_ghz: f64 },
    MwOff,
    Pulse { angle_deg: f64, phase: Phase, saturation: bool },
    Acquire { n_points: u32, dwell_s: f64, index: usize },
    Wait,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t_start_s: f64,
    pub duration_s: f64,
    pub channel: Channel,
    pub payload: Payload,
}

impl Event {
    pub fn t_end_s(&self) -> f64 {
        self.t_start_s + self.duration_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompileDefaults {
    /// RF pulse length; zero treats pulses as instantaneous.
    pub pulse_length_s: f64,
    pub saturation_spacing_s: f64,
}

impl Default for CompileDefaults {
    fn default() -> Self {
        CompileDefaults {
            pulse_length_s: 0.0,
            saturation_spacing_s: 10e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Timeline {
    pub events: Vec<Event>,
    pub duration_s: f64,
}

impl Timeline {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn events_on(&self, channel: Channel) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.channel == channel)
    }

    /// Intervals `(start, end, frequency)` during which the microwave is on.
    pub fn mw_intervals(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        let mut open: Option<(f64, f64)> = None;
        for e in self.events_on(Channel::Mw) {
            match e.payload {
                Payload::MwOn { frequency_ghz } => {
                    if let Some((t0, f)) = open.take() {
                        out.push((t0, e.t_start_s, f));
                    }
                    open = Some((e.t_start_s, frequency_ghz));
                }
                Payload::MwOff => {
                    if let Some((t0, f)) = open.take() {
                        out.push((t0, e.t_start_s, f));
                    }
                }
                _ => {}
            }
        }
        if let Some((t0, f)) = open {
            out.push((t0, self.duration_s, f));
        }
        out
    }

    /// Time ordering, no overlapping RF pulses, and no acquisition
    /// overlapping an RF pulse.
    pub fn validate(&self) -> Result<()> {
        if self.events.windows(2).any(|w| w[1].t_start_s < w[0].t_start_s) {
            return Err(Error::Compile("events are not time-ordered".into()));
        }
        let overlap = |a: &Event, b: &Event| a.t_start_s < b.t_end_s() && b.t_start_s < a.t_end_s();
        let rf: Vec<(usize, &Event)> =
            self.events.iter().enumerate().filter(|(_, e)| e.channel == Channel::Rf).collect();
        let acq: Vec<(usize, &Event)> =
            self.events.iter().enumerate().filter(|(_, e)| e.channel == Channel::Acq).collect();
        for (n, &(i, a)) in rf.iter().enumerate() {
            for &(j, b) in &rf[n + 1..] {
                if overlap(a, b) {
                    return Err(overlap_error("rf pulse", i, a, "rf pulse", j, b));
                }
            }
            for &(j, b) in &acq {
                if overlap(a, b) {
                    return Err(overlap_error("rf pulse", i, a, "acquisition", j, b));
                }
            }
        }
        Ok(())
    }
}

fn overlap_error(ka: &str, i: usize, a: &Event, kb: &str, j: usize, b: &Event) -> Error {
    Error::Compile(format!(
        "{ka} (event {i}, {:.9} to {:.9} s) overlaps {kb} (event {j}, {:.9} to {:.9} s)",
        a.t_start_s,
        a.t_end_s(),
        b.t_start_s,
        b.t_end_s()
    ))
}

struct Compiler {
    defaults: CompileDefaults,
    clock: f64,
    events: Vec<Event>,
    acquisitions: usize,
}

impl Compiler {
    fn push(&mut self, duration: f64, channel: Channel, payload: Payload) {
        self.events.push(Event {
            t_start_s: self.clock,
            duration_s: duration,
            channel,
            payload,
        });
    }

    fn stmts(&mut self, stmts: &[Stmt]) {
        for s in stmts {
            match s {
                Stmt::Saturate(n) => {
                    let t0 = self.clock;
                    let dt = self.defaults.saturation_spacing_s;
                    for i in 0..*n {
                        self.clock = t0 + f64::from(i) * dt;
                        self.push(
                            self.defaults.pulse_length_s,
                            Channel::Rf,
                            Payload::Pulse {
                                angle_deg: 90.0,
                                phase: Phase::X,
                                saturation: true,
                            },
                        );
                    }
                    self.clock = t0 + f64::from(*n) * dt;
                }
                Stmt::Wait(d) => {
                    self.push(d.seconds(), Channel::Delay, Payload::Wait);
                    self.clock += d.seconds();
                }
                Stmt::MwOn(f) => self.push(0.0, Channel::Mw, Payload::MwOn { frequency_ghz: f.ghz() }),
                Stmt::MwOff => self.push(0.0, Channel::Mw, Payload::MwOff),
                Stmt::LaserOn => self.push(0.0, Channel::Laser, Payload::LaserOn),
                Stmt::LaserOff => self.push(0.0, Channel::Laser, Payload::LaserOff),
                Stmt::Pulse { angle_deg, phase } => {
                    let l = self.defaults.pulse_length_s;
                    self.push(
                        l,
                        Channel::Rf,
                        Payload::Pulse {
                            angle_deg: *angle_deg,
                            phase: *phase,
                            saturation: false,
                        },
                    );
                    self.clock += l;
                }
                Stmt::Acquire { n_points, dwell } => {
                    let d = f64::from(*n_points) * dwell.seconds();
                    let index = self.acquisitions;
                    self.acquisitions += 1;
                    self.push(
                        d,
                        Channel::Acq,
                        Payload::Acquire {
                            n_points: *n_points,
                            dwell_s: dwell.seconds(),
                            index,
                        },
                    );
                    self.clock += d;
                }
                Stmt::Loop { count, body } => {
                    for _ in 0..*count {
                        self.stmts(body);
                    }
                }
            }
        }
    }
}

/// Unrolls loops and assigns absolute start times. Every statement occupies
/// its own span of the clock: saturation `n·spacing`, waits their duration,
/// pulses the configured pulse length, acquisitions `n·dwell`.
pub fn compile_timeline(ast: &PlanAst, defaults: &CompileDefaults) -> Result<Timeline> {
    if !(defaults.pulse_length_s >= 0.0) || !(defaults.saturation_spacing_s > 0.0) {
        return Err(Error::Config("pulse length must be >= 0 and saturation spacing > 0".into()));
    }
    if defaults.pulse_length_s > defaults.saturation_spacing_s {
        return Err(Error::Compile(
            "saturation pulses longer than their spacing would overlap".into(),
        ));
    }
    let mut c = Compiler {
        defaults: *defaults,
        clock: 0.0,
        events: Vec::new(),
        acquisitions: 0,
    };
    c.stmts(&ast.stmts);
    let t = Timeline {
        events: c.events,
        duration_s: c.clock,
    };
    t.validate()?;
    Ok(t)
}
