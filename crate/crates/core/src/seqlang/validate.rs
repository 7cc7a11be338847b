use std::collections::BTreeMap;

use super::ast::*;
use super::SeqError;
use crate::experiments::ExperimentKind;
use crate::physics::{Level, MotionalPrep, ThermalDistribution, ZeemanState};
use crate::pulse::{
    Preparation, Pulse, Readout, Scan, ScanAxis, Sequence, SequenceElement, SimConfig, Transition, DEFAULT_PAIR,
};

/// A non-fatal diagnostic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

/// One experiment block resolved into a runnable sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    pub name: String,
    pub kind: Option<ExperimentKind>,
    pub sequence: Sequence,
    pub scan: Scan,
    pub shots: Option<usize>,
    pub warnings: Vec<Warning>,
}

fn err(pos: Pos, e: impl std::fmt::Display) -> SeqError {
    SeqError::new(pos, e.to_string())
}

fn zeeman(l: &LevelRef, pos: Pos) -> Result<ZeemanState, SeqError> {
    let level = if l.letter == 'S' { Level::S12 } else { Level::D52 };
    let twice_m = i8::try_from(l.twice_m).map_err(|_| SeqError::new(pos, format!("{}({}/2) is not a sublevel", l.letter, l.twice_m)))?;
    ZeemanState::new(level, twice_m).map_err(|e| err(pos, e))
}

fn resolve_pair(p: &Option<(LevelRef, LevelRef)>, pos: Pos) -> Result<(ZeemanState, ZeemanState), SeqError> {
    match p {
        Some((a, b)) => Ok((zeeman(a, pos)?, zeeman(b, pos)?)),
        None => Ok(DEFAULT_PAIR),
    }
}

fn transition(t: &TransitionRef, pos: Pos, cfg: &SimConfig) -> Result<Transition, SeqError> {
    let tr = match t {
        TransitionRef::Carrier { pair } => {
            let (from, to) = resolve_pair(pair, pos)?;
            Transition::Carrier { from, to }
        }
        TransitionRef::Blue { mode, pair } | TransitionRef::Red { mode, pair } => {
            if !cfg.modes.contains_key(mode) {
                let known: Vec<&str> = cfg.modes.keys().map(String::as_str).collect();
                return Err(SeqError::new(pos, format!("unknown motional mode '{mode}'; configured: {}", known.join(", "))));
            }
            let (from, to) = resolve_pair(pair, pos)?;
            if matches!(t, TransitionRef::Blue { .. }) {
                Transition::Blue { mode: mode.clone(), from, to }
            } else {
                Transition::Red { mode: mode.clone(), from, to }
            }
        }
        TransitionRef::Raman => Transition::Raman,
    };
    tr.check().map_err(|e| err(pos, e))?;
    Ok(tr)
}

fn pulse(p: &PulseClause, cfg: &SimConfig) -> Result<Pulse, SeqError> {
    let tr = transition(&p.transition, p.pos, cfg)?;
    let omega0 = match &p.pi_time {
        Some(q) => cfg.omega0_for_pi_time(&tr, q.canonical()),
        None => cfg.calibrated_omega0(&tr),
    }
    .map_err(|e| err(p.pos, e))?;
    let duration = match p.amount.unit {
        Unit::Pi => {
            let area = p.amount.value.to_f64();
            let k = cfg.ground_state_coupling(&tr).map_err(|e| err(p.pos, e))?.abs();
            area * std::f64::consts::PI / (omega0 * k)
        }
        _ => p.amount.canonical(),
    };
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(SeqError::new(p.pos, "pulse area and duration must be >= 0"));
    }
    Ok(Pulse {
        transition: tr,
        duration,
        phase: p.phase.map_or(0.0, |q| q.canonical()),
        detuning: p.detuning.map_or(0.0, |q| q.canonical()),
        omega0,
    })
}

pub fn validate_block(b: &Block, cfg: &SimConfig) -> Result<Compiled, SeqError> {
    let kind = match &b.kind {
        Some(k) => Some(ExperimentKind::from_name(k).ok_or_else(|| {
            SeqError::new(b.pos, format!("unknown experiment kind '{k}'; expected one of {}", ExperimentKind::names().join(", ")))
        })?),
        None => None,
    };

    let mut prep = Preparation::default();
    if let Some(pc) = &b.prep {
        prep.electronic = zeeman(&pc.level, pc.pos)?;
        let mut motion = BTreeMap::new();
        for (mode, spec) in &pc.modes {
            if !cfg.modes.contains_key(mode) {
                return Err(SeqError::new(pc.pos, format!("unknown motional mode '{mode}'")));
            }
            let m = match spec {
                MotionSpec::Thermal(n) => {
                    MotionalPrep::Thermal(ThermalDistribution::new(n.to_f64(), cfg.n_max).map_err(|e| err(pc.pos, e))?)
                }
                MotionSpec::Fock(n) => MotionalPrep::Fock(
                    usize::try_from(*n).ok().filter(|n| *n <= 10_000).ok_or_else(|| SeqError::new(pc.pos, "Fock number too large"))?,
                ),
            };
            motion.insert(mode.clone(), m);
        }
        prep.motion = motion;
    }

    let mut elements = Vec::new();
    let mut warnings = Vec::new();
    for e in &b.elements {
        match e {
            Element::Pulse(p) => elements.push(SequenceElement::Pulse(pulse(p, cfg)?)),
            Element::Wait { pos, duration } => {
                let t = duration.canonical();
                if t < 0.0 {
                    return Err(SeqError::new(*pos, "wait must be >= 0"));
                }
                elements.push(SequenceElement::Wait(t));
            }
        }
    }
    let readout = match &b.measure {
        None | Some((_, MeasureClause::Plain)) => Readout::Population { shelving: None },
        Some((pos, MeasureClause::Shelve { from, to, pi_time })) => {
            let clause = PulseClause {
                pos: *pos,
                transition: TransitionRef::Carrier { pair: Some((*from, *to)) },
                amount: Quantity { value: super::Number::ratio(1, 1).unwrap(), unit: Unit::Pi },
                phase: None,
                detuning: None,
                pi_time: *pi_time,
            };
            Readout::Population { shelving: Some(pulse(&clause, cfg)?) }
        }
        Some((pos, MeasureClause::Phonons { mode })) => {
            if !cfg.modes.contains_key(mode) {
                return Err(SeqError::new(*pos, format!("unknown motional mode '{mode}'")));
            }
            Readout::Phonons { mode: mode.clone() }
        }
    };
    elements.push(SequenceElement::Measure(readout));

    let mut sequence = Sequence::new(prep, elements);
    if let Some(q) = &b.trigger_delay {
        sequence.trigger_delay = q.millis();
    }

    let spos = b.scan.pos;
    let axis = ScanAxis::from_name(&b.scan.axis).ok_or_else(|| SeqError::new(spos, format!("unknown scan axis '{}'", b.scan.axis)))?;
    let scan = match &b.scan.range {
        ScanRange::Repeat(0) => return Err(SeqError::new(spos, "empty scan range")),
        ScanRange::Repeat(n) => Scan::repeat(usize::try_from(*n).ok().filter(|n| *n <= 1_000_000).ok_or_else(|| SeqError::new(spos, "too many repetitions"))?),
        ScanRange::Range { lo, hi, step } => {
            let conv = |q: &Quantity| if axis == ScanAxis::Delay { q.millis() } else { q.canonical() };
            let (lo, hi, step) = (conv(lo), conv(hi), conv(step));
            if step <= 0.0 {
                return Err(SeqError::new(spos, "scan step must be > 0"));
            }
            if hi < lo {
                return Err(SeqError::new(spos, "empty scan range: upper end below lower end"));
            }
            if (hi - lo) / step > 1e6 {
                return Err(SeqError::new(spos, "scan has more than a million points"));
            }
            Scan::linspace_step(axis, lo, hi, step).map_err(|e| err(spos, e))?
        }
    };
    if !axis.applies_to(&sequence) {
        return Err(SeqError::new(spos, format!("scan axis '{}' matches no element of experiment '{}'", axis.name(), b.name)));
    }
    if axis == ScanAxis::Delay && scan.values.iter().any(|v| !(0.0..crate::noise::LINE_PERIOD_MS).contains(v)) {
        return Err(SeqError::new(spos, "trigger delays must lie in [0, 20) ms"));
    }

    sequence.validate(cfg).map_err(|e| err(b.pos, e))?;
    // probe one scan value so axis-dependent problems surface here
    if let Some(&v) = scan.values.first() {
        axis.apply(&sequence, v).validate(cfg).map_err(|e| err(spos, e))?;
    }

    if let Some(first) = sequence.pulses().next() {
        if let Transition::Red { mode, .. } = &first.transition {
            let pair = sequence.qubit_pair().map_err(|e| err(b.pos, e))?;
            let ground = match sequence.prep.motion.get(mode) {
                Some(MotionalPrep::Fock(0)) => true,
                Some(MotionalPrep::Thermal(d)) => d.n_bar() == 0.0,
                Some(MotionalPrep::Fock(_)) => false,
                None => cfg.modes[mode].n_bar == 0.0,
            };
            if ground && sequence.prep.electronic == pair.0 {
                let pos = b.elements.iter().find_map(|e| match e {
                    Element::Pulse(p) => Some(p.pos),
                    _ => None,
                });
                let pos = pos.unwrap_or(b.pos);
                warnings.push(Warning {
                    line: pos.line,
                    col: pos.col,
                    message: format!("red sideband on |S, n=0> of mode '{mode}' is dark; the pulse does nothing"),
                });
            }
        }
    }

    Ok(Compiled {
        name: b.name.clone(),
        kind,
        sequence,
        scan,
        shots: b.shots.map(|n| n as usize),
        warnings,
    })
}

pub fn validate(program: &Program, cfg: &SimConfig) -> Result<Vec<Compiled>, SeqError> {
    program.blocks.iter().map(|b| validate_block(b, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::super::parse_str;
    use super::*;

    fn one(src: &str) -> Result<Compiled, SeqError> {
        let p = parse_str(src)?;
        validate_block(&p.blocks[0], &SimConfig::default())
    }

    #[test]
    fn delta_m_two_is_valid() {
        let c = one("experiment e { pulse carrier S(-1/2)->D(-5/2) 1ms scan detuning -5kHz..5kHz step 1kHz }").unwrap();
        assert_eq!(c.scan.values.len(), 11);
    }

    #[test]
    fn delta_m_three_rejected() {
        let e = one("experiment e {\n pulse carrier S(-1/2)->D(5/2) pi scan none }").unwrap_err();
        assert!(e.message.contains("selection rule"), "{e}");
        assert_eq!(e.line, 2);
    }

    #[test]
    fn area_to_duration() {
        let c = one("experiment e { pulse carrier pi scan none }").unwrap();
        let p = c.sequence.pulses().next().unwrap();
        assert!((p.duration - 7.0).abs() < 1e-12);
        let c = one("experiment e { pulse carrier pi/2 pitime 20us scan none }").unwrap();
        assert!((c.sequence.pulses().next().unwrap().duration - 10.0).abs() < 1e-12);
    }

    #[test]
    fn red_first_warns() {
        let c = one("experiment e { prep S(-1/2) axial fock 0 pulse red axial pi scan none }").unwrap();
        assert_eq!(c.warnings.len(), 1);
        let c = one("experiment e { prep S(-1/2) axial fock 1 pulse red axial pi scan none }").unwrap();
        assert!(c.warnings.is_empty());
    }

    #[test]
    fn scan_axis_must_match() {
        let e = one("experiment e { pulse carrier pi scan wait 0us..10us step 1us }").unwrap_err();
        assert!(e.message.contains("matches no element"));
    }

    #[test]
    fn unknown_mode_and_kind() {
        assert!(one("experiment e { pulse blue stretch pi scan none }").is_err());
        assert!(one("experiment e { kind nonsense scan none }").is_err());
        assert_eq!(one("experiment e { kind lifetime scan none }").unwrap().kind, Some(ExperimentKind::Lifetime));
    }

    #[test]
    fn delay_units_are_exact() {
        let c = one("experiment e { pulse carrier pi scan delay 100us..0.3ms step 100us }").unwrap();
        assert_eq!(c.scan.values, vec![0.1, 0.2, 0.3]);
        let c = one("experiment e { wait 100us scan none }").unwrap();
        let d = one("experiment e { wait 0.1ms scan none }").unwrap();
        assert_eq!(c.sequence, d.sequence);
    }
}
