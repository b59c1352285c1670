use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeUnit {
    S,
    Ms,
    Us,
}

impl TimeUnit {
    pub fn seconds(self) -> f64 {
        match self {
            TimeUnit::S => 1.0,
            TimeUnit::Ms => 1e-3,
            TimeUnit::Us => 1e-6,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            TimeUnit::S => "s",
            TimeUnit::Ms => "ms",
            TimeUnit::Us => "us",
        }
    }

    pub(crate) fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "s" => Some(TimeUnit::S),
            "ms" => Some(TimeUnit::Ms),
            "us" => Some(TimeUnit::Us),
            _ => None,
        }
    }
}

/// A duration as written, keeping its unit for faithful printing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Duration {
    pub value: f64,
    pub unit: TimeUnit,
}

impl Duration {
    pub fn new(value: f64, unit: TimeUnit) -> Self {
        Duration { value, unit }
    }

    pub fn seconds(&self) -> f64 {
        self.value * self.unit.seconds()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FreqUnit {
    GHz,
    MHz,
}

impl FreqUnit {
    pub fn symbol(self) -> &'static str {
        match self {
            FreqUnit::GHz => "GHz",
            FreqUnit::MHz => "MHz",
        }
    }

    pub(crate) fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "GHz" => Some(FreqUnit::GHz),
            "MHz" => Some(FreqUnit::MHz),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub value: f64,
    pub unit: FreqUnit,
}

impl Frequency {
    pub fn new(value: f64, unit: FreqUnit) -> Self {
        Frequency { value, unit }
    }

    pub fn ghz(&self) -> f64 {
        match self.unit {
            FreqUnit::GHz => self.value,
            FreqUnit::MHz => self.value * 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    X,
    Y,
    MinusX,
    MinusY,
}

impl Phase {
    pub fn symbol(self) -> &'static str {
        match self {
            Phase::X => "x",
            Phase::Y => "y",
            Phase::MinusX => "-x",
            Phase::MinusY => "-y",
        }
    }

    pub(crate) fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "x" => Some(Phase::X),
            "y" => Some(Phase::Y),
            "-x" => Some(Phase::MinusX),
            "-y" => Some(Phase::MinusY),
            _ => None,
        }
    }

    /// Receiver phase of the signal the pulse produces.
    pub fn radians(self) -> f64 {
        use std::f64::consts::{FRAC_PI_2, PI};
        match self {
            Phase::X => 0.0,
            Phase::Y => FRAC_PI_2,
            Phase::MinusX => PI,
            Phase::MinusY => 3.0 * FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Stmt {
    Saturate(u32),
    Wait(Duration),
    MwOn(Frequency),
    MwOff,
    LaserOn,
    LaserOff,
    Pulse { angle_deg: f64, phase: Phase },
    Acquire { n_points: u32, dwell: Duration },
    Loop { count: u32, body: Vec<Stmt> },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanAst {
    pub stmts: Vec<Stmt>,
}

impl PlanAst {
    pub fn is_empty(&self) -> bool {
        self.stmts.is_empty()
    }

    /// Number of acquire statements after loop unrolling.
    pub fn acquisition_count(&self) -> usize {
        fn count(s: &[Stmt]) -> usize {
            s.iter()
                .map(|st| match st {
                    Stmt::Acquire { .. } => 1,
                    Stmt::Loop { count: n, body } => *n as usize * count(body),
                    _ => 0,
                })
                .sum()
        }
        count(&self.stmts)
    }
}

fn write_stmts(f: &mut fmt::Formatter<'_>, stmts: &[Stmt], indent: usize) -> fmt::Result {
    let pad = "  ".repeat(indent);
    for s in stmts {
        match s {
            Stmt::Saturate(n) => writeln!(f, "{pad}saturate {n}")?,
            Stmt::Wait(d) => writeln!(f, "{pad}wait {d}")?,
            Stmt::MwOn(fr) => writeln!(f, "{pad}mw on {}{}", fr.value, fr.unit.symbol())?,
            Stmt::MwOff => writeln!(f, "{pad}mw off")?,
            Stmt::LaserOn => writeln!(f, "{pad}laser on")?,
            Stmt::LaserOff => writeln!(f, "{pad}laser off")?,
            Stmt::Pulse { angle_deg, phase } => {
                writeln!(f, "{pad}pulse {angle_deg} {}", phase.symbol())?
            }
            Stmt::Acquire { n_points, dwell } => writeln!(f, "{pad}acquire {n_points} {dwell}")?,
            Stmt::Loop { count, body } => {
                writeln!(f, "{pad}loop {count} {{")?;
                write_stmts(f, body, indent + 1)?;
                writeln!(f, "{pad}}}")?;
            }
        }
    }
    Ok(())
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.value, self.unit.symbol())
    }
}

/// Canonical text form; parses back to an identical AST.
impl fmt::Display for PlanAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_stmts(f, &self.stmts, 0)
    }
}
