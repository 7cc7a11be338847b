use std::fmt::Write;

use super::ast::*;
use super::number::Number;

fn number(n: &Number) -> String {
    match n {
        Number::Decimal(d) => d.to_string(),
        Number::Fraction { num, den } => format!("{num}/{den}"),
    }
}

fn quantity(q: &Quantity) -> String {
    match (q.value, q.unit) {
        (Number::Fraction { num, den }, Unit::Pi) => format!("{num}pi/{den}"),
        (v, u) => format!("{}{}", number(&v), u.name()),
    }
}

fn level(l: &LevelRef) -> String {
    format!("{}({}/2)", l.letter, l.twice_m)
}

fn pair(p: &(LevelRef, LevelRef)) -> String {
    format!("{}->{}", level(&p.0), level(&p.1))
}

fn transition(t: &TransitionRef) -> String {
    let with_pair = |head: String, p: &Option<(LevelRef, LevelRef)>| match p {
        Some(p) => format!("{head} {}", pair(p)),
        None => head,
    };
    match t {
        TransitionRef::Carrier { pair } => with_pair("carrier".into(), pair),
        TransitionRef::Blue { mode, pair } => with_pair(format!("blue {mode}"), pair),
        TransitionRef::Red { mode, pair } => with_pair(format!("red {mode}"), pair),
        TransitionRef::Raman => "raman".into(),
    }
}

/// Canonical source text; parsing it yields a program equal to `program`.
pub fn pretty_print(program: &Program) -> String {
    let mut out = String::new();
    for (i, b) in program.blocks.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "experiment {} {{", b.name);
        if let Some(k) = &b.kind {
            let _ = writeln!(out, "  kind {k}");
        }
        if let Some(p) = &b.prep {
            let _ = write!(out, "  prep {}", level(&p.level));
            for (m, spec) in &p.modes {
                match spec {
                    MotionSpec::Thermal(n) => {
                        let _ = write!(out, " {m} thermal {}", number(n));
                    }
                    MotionSpec::Fock(n) => {
                        let _ = write!(out, " {m} fock {n}");
                    }
                }
            }
            out.push('\n');
        }
        for e in &b.elements {
            match e {
                Element::Pulse(p) => {
                    let _ = write!(out, "  pulse {} {}", transition(&p.transition), quantity(&p.amount));
                    if let Some(q) = &p.phase {
                        let _ = write!(out, " phase {}", quantity(q));
                    }
                    if let Some(q) = &p.detuning {
                        let _ = write!(out, " detuning {}", quantity(q));
                    }
                    if let Some(q) = &p.pi_time {
                        let _ = write!(out, " pitime {}", quantity(q));
                    }
                    out.push('\n');
                }
                Element::Wait { duration, .. } => {
                    let _ = writeln!(out, "  wait {}", quantity(duration));
                }
            }
        }
        if let Some((_, m)) = &b.measure {
            match m {
                MeasureClause::Plain => out.push_str("  measure\n"),
                MeasureClause::Shelve { from, to, pi_time } => {
                    let _ = write!(out, "  measure shelve {}", pair(&(*from, *to)));
                    if let Some(q) = pi_time {
                        let _ = write!(out, " pitime {}", quantity(q));
                    }
                    out.push('\n');
                }
                MeasureClause::Phonons { mode } => {
                    let _ = writeln!(out, "  measure phonons {mode}");
                }
            }
        }
        match &b.scan.range {
            ScanRange::Range { lo, hi, step } => {
                let _ = writeln!(out, "  scan {} {}..{} step {}", b.scan.axis, quantity(lo), quantity(hi), quantity(step));
            }
            ScanRange::Repeat(n) => {
                let _ = writeln!(out, "  scan repeat {n}");
            }
        }
        if let Some(n) = b.shots {
            let _ = writeln!(out, "  shots {n}");
        }
        if let Some(q) = &b.trigger_delay {
            let _ = writeln!(out, "  trigger line delay {}", quantity(q));
        }
        out.push_str("}\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse_str;
    use super::*;

    #[test]
    fn round_trip() {
        let src = "experiment e { prep S(-1/2) radial thermal 7.5 axial fock 2
            pulse blue axial S(-1/2)->D(-5/2) 2pi/3 phase -pi/2 detuning -1.25kHz
            pulse raman 1ms
            wait 0.1ms
            measure phonons axial
            scan wait 0us..1s step 250ms shots 7 trigger line delay 2.5ms kind heating }";
        let p = parse_str(src).unwrap();
        let printed = pretty_print(&p);
        assert_eq!(parse_str(&printed).unwrap(), p);
        assert_eq!(pretty_print(&parse_str(&printed).unwrap()), printed);
    }
}
