use super::number::Number;

/// Source position. Positions never take part in equality, so a program
/// and its reprinted form compare equal.
#[derive(Debug, Clone, Copy, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Pos {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    Us,
    Ms,
    S,
    Hz,
    KHz,
    MHz,
    Deg,
    Rad,
    Pi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Time,
    Frequency,
    Angle,
}

impl Unit {
    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "us" | "μs" | "µs" => Unit::Us,
            "ms" => Unit::Ms,
            "s" => Unit::S,
            "Hz" => Unit::Hz,
            "kHz" => Unit::KHz,
            "MHz" => Unit::MHz,
            "deg" => Unit::Deg,
            "rad" => Unit::Rad,
            "pi" => Unit::Pi,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Unit::Us => "us",
            Unit::Ms => "ms",
            Unit::S => "s",
            Unit::Hz => "Hz",
            Unit::KHz => "kHz",
            Unit::MHz => "MHz",
            Unit::Deg => "deg",
            Unit::Rad => "rad",
            Unit::Pi => "pi",
        }
    }

    pub fn dimension(self) -> Dimension {
        match self {
            Unit::Us | Unit::Ms | Unit::S => Dimension::Time,
            Unit::Hz | Unit::KHz | Unit::MHz => Dimension::Frequency,
            Unit::Deg | Unit::Rad | Unit::Pi => Dimension::Angle,
        }
    }

    /// Decimal exponent converting to the canonical unit (μs or Hz).
    fn decade(self) -> Option<i32> {
        match self {
            Unit::Us | Unit::Hz => Some(0),
            Unit::Ms | Unit::KHz => Some(3),
            Unit::S | Unit::MHz => Some(6),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: Number,
    pub unit: Unit,
}

impl Quantity {
    /// Value in canonical units: μs for times, Hz for frequencies, radians for
    /// angles. Decimal times and frequencies convert exactly.
    pub fn canonical(&self) -> f64 {
        match (self.unit.decade(), self.value) {
            (Some(k), Number::Decimal(d)) => d.shift(k).to_f64(),
            (Some(k), Number::Fraction { num, den }) => num as f64 * 10f64.powi(k) / den as f64,
            (None, v) => match self.unit {
                Unit::Pi => v.to_f64() * std::f64::consts::PI,
                Unit::Deg => v.to_f64().to_radians(),
                _ => v.to_f64(),
            },
        }
    }

    /// Time in ms, converted exactly for decimal input.
    pub fn millis(&self) -> f64 {
        match (self.unit.decade(), self.value) {
            (Some(k), Number::Decimal(d)) => d.shift(k - 3).to_f64(),
            _ => self.canonical() * 1e-3,
        }
    }
}

/// A Zeeman sublevel as written, e.g. `D(-5/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelRef {
    pub letter: char,
    pub twice_m: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransitionRef {
    Carrier { pair: Option<(LevelRef, LevelRef)> },
    Blue { mode: String, pair: Option<(LevelRef, LevelRef)> },
    Red { mode: String, pair: Option<(LevelRef, LevelRef)> },
    Raman,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseClause {
    pub pos: Pos,
    pub transition: TransitionRef,
    /// An angle in π units (area) or a time (duration).
    pub amount: Quantity,
    pub phase: Option<Quantity>,
    pub detuning: Option<Quantity>,
    pub pi_time: Option<Quantity>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureClause {
    Plain,
    Shelve { from: LevelRef, to: LevelRef, pi_time: Option<Quantity> },
    Phonons { mode: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    Pulse(PulseClause),
    Wait { pos: Pos, duration: Quantity },
}

#[derive(Debug, Clone, PartialEq)]
pub enum MotionSpec {
    Thermal(Number),
    Fock(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepClause {
    pub pos: Pos,
    pub level: LevelRef,
    pub modes: Vec<(String, MotionSpec)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScanRange {
    Range { lo: Quantity, hi: Quantity, step: Quantity },
    /// Repeat the unmodified sequence this many times.
    Repeat(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanClause {
    pub pos: Pos,
    /// `detuning`, `duration`, `wait`, `delay` or `repeat`.
    pub axis: String,
    pub range: ScanRange,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub pos: Pos,
    pub name: String,
    pub kind: Option<String>,
    pub prep: Option<PrepClause>,
    pub elements: Vec<Element>,
    pub measure: Option<(Pos, MeasureClause)>,
    pub scan: ScanClause,
    pub shots: Option<u64>,
    pub trigger_delay: Option<Quantity>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub blocks: Vec<Block>,
}
