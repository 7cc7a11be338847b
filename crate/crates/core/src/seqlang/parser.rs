use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::number::Number;
use super::SeqError;

type PResult<T> = Result<T, SeqError>;

struct Parser<'a> {
    toks: &'a [Token],
    i: usize,
}

fn describe(t: &Token) -> String {
    match t.kind {
        TokenKind::Keyword => format!("keyword '{}'", t.text),
        TokenKind::Identifier => format!("identifier '{}'", t.text),
        TokenKind::Number => format!("number {}", t.text),
        TokenKind::Unit => format!("unit '{}'", t.text),
        TokenKind::Punctuation => format!("'{}'", t.text),
    }
}

fn dim_name(d: Dimension) -> &'static str {
    match d {
        Dimension::Time => "a duration (us, ms, s)",
        Dimension::Frequency => "a frequency (Hz, kHz, MHz)",
        Dimension::Angle => "an angle (pi, rad, deg)",
    }
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.i)
    }

    fn peek_at(&self, k: usize) -> Option<&'a Token> {
        self.toks.get(self.i + k)
    }

    fn here(&self) -> Pos {
        match self.peek() {
            Some(t) => t.pos(),
            None => self.toks.last().map(|t| Pos { line: t.line, col: t.col + t.text.chars().count() }).unwrap_or(Pos {
                line: 1,
                col: 1,
            }),
        }
    }

    fn err<T>(&self, expected: &str) -> PResult<T> {
        let found = self.peek().map_or_else(|| "end of input".to_string(), describe);
        Err(SeqError::new(self.here(), format!("expected {expected}, found {found}")))
    }

    fn next(&mut self) -> Option<&'a Token> {
        let t = self.toks.get(self.i);
        self.i += 1;
        t
    }

    fn at(&self, kind: TokenKind, text: &str) -> bool {
        self.peek().is_some_and(|t| t.is(kind, text))
    }

    fn eat(&mut self, kind: TokenKind, text: &str) -> bool {
        if self.at(kind, text) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind, text: &str) -> PResult<Pos> {
        if self.at(kind, text) {
            Ok(self.next().unwrap().pos())
        } else {
            self.err(&format!("'{text}'"))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                self.i += 1;
                Ok(t.text.clone())
            }
            _ => self.err(what),
        }
    }

    fn number(&mut self, what: &str) -> PResult<Number> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Number => {
                self.i += 1;
                Ok(t.number.expect("number tokens carry a value"))
            }
            _ => self.err(what),
        }
    }

    fn count(&mut self, what: &str) -> PResult<u64> {
        let pos = self.here();
        let n = self.number(what)?;
        n.as_decimal()
            .and_then(|d| d.as_u64())
            .ok_or_else(|| SeqError::new(pos, format!("expected {what}, found {}", n.to_f64())))
    }

    fn quantity(&mut self, dims: &[Dimension]) -> PResult<Quantity> {
        let expected = dims.iter().map(|d| dim_name(*d)).collect::<Vec<_>>().join(" or ");
        let value = self.number(&expected)?;
        match self.peek() {
            Some(t) if t.kind == TokenKind::Unit => {
                let unit = Unit::from_name(&t.text).expect("unit tokens are valid units");
                if !dims.contains(&unit.dimension()) {
                    return Err(SeqError::new(t.pos(), format!("unit mismatch: expected {expected}, found '{}'", t.text)));
                }
                self.i += 1;
                Ok(Quantity { value, unit })
            }
            _ => self.err(&format!("a unit for {expected}")),
        }
    }

    fn level(&mut self) -> PResult<LevelRef> {
        let pos = self.here();
        let letter = match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier && (t.text == "S" || t.text == "D") => {
                self.i += 1;
                t.text.chars().next().unwrap()
            }
            _ => return self.err("a level S(m) or D(m)"),
        };
        self.expect(TokenKind::Punctuation, "(")?;
        let num_pos = self.here();
        let num = self.number("a magnetic quantum number like -1/2")?;
        self.expect(TokenKind::Punctuation, "/")?;
        let den = self.count("the denominator 2")?;
        self.expect(TokenKind::Punctuation, ")")?;
        let twice_m = num
            .as_decimal()
            .filter(|d| d.is_integer() && den == 2)
            .and_then(|d| i64::try_from(d.mantissa()).ok().map(|m| m * 10i64.pow(d.exponent() as u32)))
            .filter(|m| m % 2 != 0)
            .ok_or_else(|| SeqError::new(num_pos, "magnetic quantum number must be a half-integer k/2"))?;
        let _ = pos;
        Ok(LevelRef { letter, twice_m })
    }

    fn pair(&mut self) -> PResult<(LevelRef, LevelRef)> {
        let a = self.level()?;
        self.expect(TokenKind::Punctuation, "->")?;
        let b = self.level()?;
        Ok((a, b))
    }

    fn at_level(&self) -> bool {
        matches!(self.peek(), Some(t) if t.kind == TokenKind::Identifier && (t.text == "S" || t.text == "D"))
            && self.peek_at(1).is_some_and(|t| t.is(TokenKind::Punctuation, "("))
    }

    fn opt_pair(&mut self) -> PResult<Option<(LevelRef, LevelRef)>> {
        if self.at_level() {
            Ok(Some(self.pair()?))
        } else {
            Ok(None)
        }
    }

    fn transition(&mut self) -> PResult<TransitionRef> {
        let t = match self.peek() {
            Some(t) if t.kind == TokenKind::Keyword => t.text.as_str(),
            _ => return self.err("a transition (carrier, blue, red, raman)"),
        };
        match t {
            "carrier" => {
                self.i += 1;
                Ok(TransitionRef::Carrier { pair: self.opt_pair()? })
            }
            "blue" | "red" => {
                self.i += 1;
                let mode = self.ident("a motional mode name")?;
                let pair = self.opt_pair()?;
                Ok(if t == "blue" { TransitionRef::Blue { mode, pair } } else { TransitionRef::Red { mode, pair } })
            }
            "raman" => {
                self.i += 1;
                Ok(TransitionRef::Raman)
            }
            _ => self.err("a transition (carrier, blue, red, raman)"),
        }
    }

    fn pulse(&mut self, pos: Pos) -> PResult<PulseClause> {
        let transition = self.transition()?;
        let amount = self.quantity(&[Dimension::Angle, Dimension::Time])?;
        if amount.unit.dimension() == Dimension::Angle && amount.unit != Unit::Pi {
            return Err(SeqError::new(pos, "pulse areas are given in units of pi"));
        }
        let mut clause = PulseClause { pos, transition, amount, phase: None, detuning: None, pi_time: None };
        loop {
            let opt_pos = self.here();
            let (slot, dim, name) = if self.eat(TokenKind::Keyword, "phase") {
                (&mut clause.phase, Dimension::Angle, "phase")
            } else if self.eat(TokenKind::Keyword, "detuning") {
                (&mut clause.detuning, Dimension::Frequency, "detuning")
            } else if self.eat(TokenKind::Keyword, "pitime") {
                (&mut clause.pi_time, Dimension::Time, "pitime")
            } else {
                break;
            };
            if slot.is_some() {
                return Err(SeqError::new(opt_pos, format!("duplicate '{name}' option")));
            }
            let q = self.quantity(&[dim])?;
            *slot = Some(q);
        }
        Ok(clause)
    }

    fn measure(&mut self) -> PResult<MeasureClause> {
        if self.eat(TokenKind::Keyword, "shelve") {
            let (from, to) = self.pair()?;
            let pi_time = if self.eat(TokenKind::Keyword, "pitime") { Some(self.quantity(&[Dimension::Time])?) } else { None };
            Ok(MeasureClause::Shelve { from, to, pi_time })
        } else if self.eat(TokenKind::Keyword, "phonons") {
            Ok(MeasureClause::Phonons { mode: self.ident("a motional mode name")? })
        } else {
            Ok(MeasureClause::Plain)
        }
    }

    fn prep(&mut self, pos: Pos) -> PResult<PrepClause> {
        let level = self.level()?;
        let mut modes: Vec<(String, MotionSpec)> = Vec::new();
        while self.peek().is_some_and(|t| t.kind == TokenKind::Identifier) {
            let mpos = self.here();
            let name = self.ident("a motional mode name")?;
            if modes.iter().any(|(m, _)| *m == name) {
                return Err(SeqError::new(mpos, format!("mode '{name}' prepared twice")));
            }
            let spec = if self.eat(TokenKind::Keyword, "thermal") {
                let npos = self.here();
                let n = self.number("a mean phonon number")?;
                if n.is_negative() {
                    return Err(SeqError::new(npos, "mean phonon number must be >= 0"));
                }
                MotionSpec::Thermal(n)
            } else if self.eat(TokenKind::Keyword, "fock") {
                MotionSpec::Fock(self.count("a phonon number")?)
            } else {
                return self.err("'thermal' or 'fock'");
            };
            modes.push((name, spec));
        }
        Ok(PrepClause { pos, level, modes })
    }

    fn scan(&mut self, pos: Pos) -> PResult<ScanClause> {
        let axis = match self.peek() {
            Some(t) if t.kind == TokenKind::Keyword => t.text.clone(),
            _ => return self.err("a scan axis (detuning, duration, wait, delay, repeat, none)"),
        };
        let dim = match axis.as_str() {
            "detuning" => Dimension::Frequency,
            "duration" | "wait" | "delay" => Dimension::Time,
            "repeat" => {
                self.i += 1;
                let n = self.count("a repetition count")?;
                return Ok(ScanClause { pos, axis, range: ScanRange::Repeat(n) });
            }
            "none" => {
                self.i += 1;
                return Ok(ScanClause { pos, axis: "repeat".into(), range: ScanRange::Repeat(1) });
            }
            _ => return self.err("a scan axis (detuning, duration, wait, delay, repeat, none)"),
        };
        self.i += 1;
        let lo = self.quantity(&[dim])?;
        self.expect(TokenKind::Punctuation, "..")?;
        let hi = self.quantity(&[dim])?;
        self.expect(TokenKind::Keyword, "step")?;
        let step = self.quantity(&[dim])?;
        Ok(ScanClause { pos, axis, range: ScanRange::Range { lo, hi, step } })
    }

    fn block(&mut self) -> PResult<Block> {
        let pos = self.expect(TokenKind::Keyword, "experiment")?;
        let name = self.ident("an experiment name")?;
        self.expect(TokenKind::Punctuation, "{")?;
        let mut kind = None;
        let mut prep = None;
        let mut elements = Vec::new();
        let mut measure: Option<(Pos, MeasureClause)> = None;
        let mut scan = None;
        let mut shots = None;
        let mut trigger = None;
        let dup = |p: Pos, what: &str| Err(SeqError::new(p, format!("duplicate '{what}' clause")));
        loop {
            if self.eat(TokenKind::Punctuation, ";") {
                continue;
            }
            if self.at(TokenKind::Punctuation, "}") {
                let close = self.here();
                self.i += 1;
                let scan = scan.ok_or_else(|| SeqError::new(close, format!("experiment '{name}' is missing its scan clause")))?;
                return Ok(Block { pos, name, kind, prep, elements, measure, scan, shots, trigger_delay: trigger });
            }
            let cpos = self.here();
            let kw = match self.peek() {
                Some(t) if t.kind == TokenKind::Keyword => t.text.as_str(),
                _ => return self.err("a clause (kind, prep, pulse, wait, measure, scan, shots, trigger) or '}'"),
            };
            if matches!(kw, "pulse" | "wait") {
                if let Some((mpos, _)) = &measure {
                    return Err(SeqError::new(
                        cpos,
                        format!("'{kw}' after the measurement at {}:{}; measure must be the last element", mpos.line, mpos.col),
                    ));
                }
            }
            match kw {
                "kind" => {
                    self.i += 1;
                    if kind.is_some() {
                        return dup(cpos, "kind");
                    }
                    kind = Some(self.ident("an experiment kind")?);
                }
                "prep" => {
                    self.i += 1;
                    if prep.is_some() {
                        return dup(cpos, "prep");
                    }
                    prep = Some(self.prep(cpos)?);
                }
                "pulse" => {
                    self.i += 1;
                    elements.push(Element::Pulse(self.pulse(cpos)?));
                }
                "wait" => {
                    self.i += 1;
                    let duration = self.quantity(&[Dimension::Time])?;
                    elements.push(Element::Wait { pos: cpos, duration });
                }
                "measure" => {
                    self.i += 1;
                    if measure.is_some() {
                        return dup(cpos, "measure");
                    }
                    measure = Some((cpos, self.measure()?));
                }
                "scan" => {
                    self.i += 1;
                    if scan.is_some() {
                        return dup(cpos, "scan");
                    }
                    scan = Some(self.scan(cpos)?);
                }
                "shots" => {
                    self.i += 1;
                    if shots.is_some() {
                        return dup(cpos, "shots");
                    }
                    let spos = self.here();
                    let n = self.count("a shot count")?;
                    if n == 0 {
                        return Err(SeqError::new(spos, "shots must be > 0"));
                    }
                    shots = Some(n);
                }
                "trigger" => {
                    self.i += 1;
                    if trigger.is_some() {
                        return dup(cpos, "trigger");
                    }
                    self.expect(TokenKind::Keyword, "line")?;
                    self.expect(TokenKind::Keyword, "delay")?;
                    trigger = Some(self.quantity(&[Dimension::Time])?);
                }
                _ => return self.err("a clause (kind, prep, pulse, wait, measure, scan, shots, trigger) or '}'"),
            }
        }
    }

    fn program(&mut self) -> PResult<Program> {
        let mut blocks: Vec<Block> = Vec::new();
        while self.peek().is_some() {
            if self.eat(TokenKind::Punctuation, ";") {
                continue;
            }
            let b = self.block()?;
            if blocks.iter().any(|o| o.name == b.name) {
                return Err(SeqError::new(b.pos, format!("duplicate experiment name '{}'", b.name)));
            }
            blocks.push(b);
        }
        Ok(Program { blocks })
    }
}

pub fn parse(tokens: &[Token]) -> Result<Program, SeqError> {
    Parser { toks: tokens, i: 0 }.program()
}

pub fn parse_str(text: &str) -> Result<Program, SeqError> {
    parse(&tokenize(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RAMSEY: &str = "experiment ramsey {
        pulse carrier pi/2; wait 100us; pulse carrier pi/2
        scan detuning \u{2212}20kHz..20kHz step 250Hz; shots 100
    }";

    #[test]
    fn ramsey_program() {
        let p = parse_str(RAMSEY).unwrap();
        let b = &p.blocks[0];
        assert_eq!(b.elements.len(), 3);
        assert_eq!(b.scan.axis, "detuning");
        assert_eq!(b.shots, Some(100));
        match &b.elements[1] {
            Element::Wait { duration, .. } => assert_eq!(duration.canonical(), 100.0),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn duplicate_shots_named() {
        let e = parse_str("experiment a { scan none shots 10 shots 20 }").unwrap_err();
        assert!(e.message.contains("'shots'"), "{e}");
        assert_eq!((e.line, e.col), (1, 35));
    }

    #[test]
    fn missing_scan() {
        let e = parse_str("experiment a {\n wait 1ms\n}").unwrap_err();
        assert!(e.message.contains("scan"));
        assert_eq!(e.line, 3);
    }

    #[test]
    fn unit_mismatch() {
        let e = parse_str("experiment a { wait 10Hz scan none }").unwrap_err();
        assert!(e.message.contains("unit mismatch"), "{e}");
        assert_eq!((e.line, e.col), (1, 23));
    }

    #[test]
    fn unknown_keyword() {
        let e = parse_str("experiment a { bogus 3 }").unwrap_err();
        assert!(e.message.contains("expected a clause"), "{e}");
    }

    #[test]
    fn levels_and_options() {
        let p = parse_str(
            "experiment e { prep S(-1/2) axial fock 0 radial thermal 7
             pulse carrier S(-1/2)->D(-5/2) 1ms detuning 2.5kHz phase 90deg pitime 1ms
             measure shelve S(-1/2)->D(-5/2) scan delay 0ms..19ms step 1ms trigger line delay 0ms }",
        )
        .unwrap();
        let b = &p.blocks[0];
        assert_eq!(b.prep.as_ref().unwrap().modes.len(), 2);
        match &b.elements[0] {
            Element::Pulse(pc) => {
                assert_eq!(pc.detuning.unwrap().canonical(), 2500.0);
                assert!((pc.phase.unwrap().canonical() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
            }
            e => panic!("{e:?}"),
        }
        assert!(parse_str("experiment e { prep S(-1/3) scan none }").is_err());
        assert!(parse_str("experiment e { prep S(-2/2) scan none }").is_err());
    }

    #[test]
    fn measure_is_last() {
        assert!(parse_str("experiment e { measure wait 1us scan none }").is_err());
        assert!(parse_str("experiment e { wait 1us measure scan none shots 3 }").is_ok());
    }

    #[test]
    fn eof_error_has_position() {
        let e = parse_str("experiment e {\n  wait").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.message.contains("end of input"));
    }
}
