use super::ast::{Pos, Unit};
use super::number::{Decimal, Number};
use super::SeqError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Keyword,
    Identifier,
    Number,
    Unit,
    Punctuation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: usize,
    pub col: usize,
    /// Parsed value of a number token.
    pub number: Option<Number>,
}

impl Token {
    pub fn pos(&self) -> Pos {
        Pos { line: self.line, col: self.col }
    }

    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }
}

pub const KEYWORDS: &[&str] = &[
    "experiment", "kind", "prep", "pulse", "wait", "measure", "scan", "step", "shots", "trigger", "line", "delay",
    "phase", "detuning", "pitime", "shelve", "phonons", "thermal", "fock", "carrier", "blue", "red", "raman",
    "duration", "repeat", "none",
];

struct Lexer {
    chars: Vec<char>,
    i: usize,
    line: usize,
    col: usize,
    out: Vec<Token>,
}

fn is_word_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_minus(c: char) -> bool {
    c == '-' || c == '\u{2212}'
}

impl Lexer {
    fn peek(&self, k: usize) -> Option<char> {
        self.chars.get(self.i + k).copied()
    }

    fn bump(&mut self) -> char {
        let c = self.chars[self.i];
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn pos(&self) -> Pos {
        Pos { line: self.line, col: self.col }
    }

    fn push(&mut self, kind: TokenKind, text: String, pos: Pos, number: Option<Number>) {
        self.out.push(Token { kind, text, line: pos.line, col: pos.col, number });
    }

    fn word(&mut self) -> String {
        let mut w = String::new();
        while let Some(c) = self.peek(0) {
            if !is_word_char(c) {
                break;
            }
            w.push(self.bump());
        }
        w
    }

    fn starts_pi(&self, k: usize) -> bool {
        self.peek(k) == Some('p')
            && self.peek(k + 1) == Some('i')
            && !self.peek(k + 2).is_some_and(is_word_char)
    }

    /// Optional `/den` after a `pi` unit.
    fn pi_denominator(&mut self) -> Result<Option<u64>, SeqError> {
        if self.peek(0) != Some('/') || !self.peek(1).is_some_and(|c| c.is_ascii_digit()) {
            return Ok(None);
        }
        let pos = self.pos();
        self.bump();
        let mut digits = String::new();
        while let Some(c) = self.peek(0).filter(|c| c.is_ascii_digit()) {
            digits.push(c);
            self.bump();
        }
        match digits.parse::<u64>() {
            Ok(d) if d > 0 => Ok(Some(d)),
            _ => Err(SeqError::new(pos, format!("invalid denominator '/{digits}' after pi"))),
        }
    }

    fn pi_number(&mut self, coeff: Decimal, pos: Pos, unit_pos: Pos) -> Result<(), SeqError> {
        let value = match self.pi_denominator()? {
            None => Number::Decimal(coeff),
            Some(den) => {
                let num = coeff
                    .as_u64()
                    .or_else(|| Decimal::new(-coeff.mantissa(), coeff.exponent()).as_u64())
                    .filter(|_| coeff.is_integer())
                    .and_then(|v| i64::try_from(v).ok())
                    .ok_or_else(|| SeqError::new(pos, "a pi fraction needs an integer numerator"))?;
                let num = if coeff.is_negative() { -num } else { num };
                Number::ratio(num, den).ok_or_else(|| SeqError::new(pos, "pi fraction out of range"))?
            }
        };
        let text = match value {
            Number::Decimal(d) => d.to_string(),
            Number::Fraction { num, den } => format!("{num}/{den}"),
        };
        self.push(TokenKind::Number, text, pos, Some(value));
        self.push(TokenKind::Unit, "pi".into(), unit_pos, None);
        Ok(())
    }

    fn number(&mut self) -> Result<(), SeqError> {
        let pos = self.pos();
        let mut text = String::new();
        if self.peek(0).is_some_and(is_minus) {
            self.bump();
            text.push('-');
            if self.starts_pi(0) {
                let unit_pos = self.pos();
                self.bump();
                self.bump();
                return self.pi_number(Decimal::integer(-1), pos, unit_pos);
            }
        }
        while let Some(c) = self.peek(0).filter(|c| c.is_ascii_digit()) {
            text.push(c);
            self.bump();
        }
        if self.peek(0) == Some('.') && self.peek(1).is_some_and(|c| c.is_ascii_digit()) {
            text.push(self.bump());
            while let Some(c) = self.peek(0).filter(|c| c.is_ascii_digit()) {
                text.push(c);
                self.bump();
            }
        }
        if matches!(self.peek(0), Some('e' | 'E')) {
            let signed = matches!(self.peek(1), Some('+' | '-')) && self.peek(2).is_some_and(|c| c.is_ascii_digit());
            if signed || self.peek(1).is_some_and(|c| c.is_ascii_digit()) {
                text.push(self.bump());
                if signed {
                    text.push(self.bump());
                }
                while let Some(c) = self.peek(0).filter(|c| c.is_ascii_digit()) {
                    text.push(c);
                    self.bump();
                }
            }
        }
        let value = Decimal::parse(text.trim_start_matches('+'))
            .ok_or_else(|| SeqError::new(pos, format!("malformed number '{text}'")))?;
        if self.peek(0).is_some_and(is_word_start) {
            let unit_pos = self.pos();
            let w = self.word();
            return match Unit::from_name(&w) {
                Some(Unit::Pi) => self.pi_number(value, pos, unit_pos),
                Some(u) => {
                    self.push(TokenKind::Number, value.to_string(), pos, Some(Number::Decimal(value)));
                    self.push(TokenKind::Unit, u.name().into(), unit_pos, None);
                    Ok(())
                }
                None => Err(SeqError::new(
                    unit_pos,
                    format!("unknown unit '{w}'; expected one of us, ms, s, Hz, kHz, MHz, deg, rad, pi"),
                )),
            };
        }
        self.push(TokenKind::Number, value.to_string(), pos, Some(Number::Decimal(value)));
        Ok(())
    }

    fn run(mut self) -> Result<Vec<Token>, SeqError> {
        while let Some(c) = self.peek(0) {
            let pos = self.pos();
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while self.peek(0).is_some_and(|c| c != '\n') {
                    self.bump();
                }
            } else if c.is_ascii_digit()
                || (is_minus(c) && (self.peek(1).is_some_and(|d| d.is_ascii_digit()) || self.starts_pi(1)))
            {
                self.number()?;
            } else if is_word_start(c) {
                if self.starts_pi(0) {
                    self.bump();
                    self.bump();
                    self.pi_number(Decimal::integer(1), pos, pos)?;
                    continue;
                }
                let w = self.word();
                let kind = if KEYWORDS.contains(&w.as_str()) {
                    TokenKind::Keyword
                } else if let Some(u) = Unit::from_name(&w) {
                    self.push(TokenKind::Unit, u.name().into(), pos, None);
                    continue;
                } else {
                    TokenKind::Identifier
                };
                self.push(kind, w, pos, None);
            } else {
                let text = match (c, self.peek(1)) {
                    ('.', Some('.')) => "..",
                    (m, Some('>')) if is_minus(m) => "->",
                    ('{', _) => "{",
                    ('}', _) => "}",
                    ('(', _) => "(",
                    (')', _) => ")",
                    (';', _) => ";",
                    ('/', _) => "/",
                    (',', _) => ",",
                    _ => return Err(SeqError::new(pos, format!("illegal character '{}'", c.escape_debug()))),
                };
                for _ in 0..text.chars().count() {
                    self.bump();
                }
                self.push(TokenKind::Punctuation, text.into(), pos, None);
            }
        }
        Ok(self.out)
    }
}

/// Splits `text` into tokens, dropping whitespace and `#` comments.
pub fn tokenize(text: &str) -> Result<Vec<Token>, SeqError> {
    Lexer { chars: text.chars().collect(), i: 0, line: 1, col: 1, out: Vec::new() }.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(s: &str) -> Vec<(TokenKind, String)> {
        tokenize(s).unwrap().into_iter().map(|t| (t.kind, t.text)).collect()
    }

    #[test]
    fn wait_with_unit() {
        assert_eq!(
            kinds("wait 100us"),
            vec![
                (TokenKind::Keyword, "wait".into()),
                (TokenKind::Number, "100".into()),
                (TokenKind::Unit, "us".into())
            ]
        );
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").unwrap().is_empty());
        assert!(tokenize("  # only a comment\n").unwrap().is_empty());
    }

    #[test]
    fn pi_fraction_is_half() {
        let t = tokenize("pulse carrier pi/2").unwrap();
        assert_eq!(t[2].kind, TokenKind::Number);
        assert_eq!(t[2].number.unwrap().to_f64(), 0.5);
        assert_eq!(t[3].kind, TokenKind::Unit);
        assert_eq!(t[3].text, "pi");
        assert_eq!(tokenize("3pi/4").unwrap()[0].number.unwrap().to_f64(), 0.75);
        assert_eq!(tokenize("-pi/2").unwrap()[0].number.unwrap().to_f64(), -0.5);
        assert_eq!(tokenize("2pi/3").unwrap()[0].number, Some(Number::Fraction { num: 2, den: 3 }));
    }

    #[test]
    fn zeeman_level_tokens() {
        let k = kinds("S(-1/2)->D(-5/2)");
        let texts: Vec<&str> = k.iter().map(|(_, t)| t.as_str()).collect();
        assert_eq!(texts, ["S", "(", "-1", "/", "2", ")", "->", "D", "(", "-5", "/", "2", ")"]);
    }

    #[test]
    fn range_and_unicode() {
        let k = kinds("\u{2212}20kHz..20kHz 9.5μs 3µs");
        let texts: Vec<&str> = k.iter().map(|(_, t)| t.as_str()).collect();
        assert_eq!(texts, ["-20", "kHz", "..", "20", "kHz", "9.5", "us", "3", "us"]);
    }

    #[test]
    fn positions_and_errors() {
        let t = tokenize("experiment a {\n  wait 1ms\n}").unwrap();
        assert_eq!((t[3].line, t[3].col), (2, 3));
        let e = tokenize("wait 1ms\n  wait 3 @").unwrap_err();
        assert_eq!((e.line, e.col), (2, 10));
        let e = tokenize("wait 5ns").unwrap_err();
        assert!(e.message.contains("unknown unit"));
        assert!(tokenize("1.5pi/2").is_err());
    }
}
