//! The `.iihs` text format.
//!
//! ```text
//! # comment
//! secrets: [poor, rich]
//! observables: [cheap, expensive]
//! initial: root
//! mode: fully_probabilistic      # or secret_nondeterministic, general
//! lenient: false                 # optional
//!
//! state root { dist { @a* -> offer @ 1 } }
//! state offer {
//!   dist { cheap -> c @ 1/2, expensive -> e @ 0.5 }
//! }
//! ```
//!
//! Each `dist { ... }` block is one distribution of the state. A state block
//! may hold several of them (nondeterminism). Probabilities are decimals or
//! `p/q` fractions in `[0, 1]`. Targets that never get a block of their own
//! are terminal. Labels are identifiers; names starting with `@` are reserved
//! for the placeholders `@a*` and `@b*`. State ids may contain any of
//! `A-Z a-z 0-9 _ . * @ ' -`.

use std::fmt::Write as _;

use crate::model::{Iihs, IihsBuilder, Mode};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Word(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Arrow,
    At,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '.' | '*' | '@' | '\'' | '-' | '/' | '+')
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let mut out = Vec::new();
    for (ln, line) in src.lines().enumerate() {
        let line_no = ln + 1;
        let line = line.split('#').next().unwrap_or("");
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let single = match c {
                '{' => Some(Tok::LBrace),
                '}' => Some(Tok::RBrace),
                '[' => Some(Tok::LBracket),
                ']' => Some(Tok::RBracket),
                ',' => Some(Tok::Comma),
                ':' => Some(Tok::Colon),
                _ => None,
            };
            if let Some(t) = single {
                out.push((line_no, t));
                i += 1;
            } else if c.is_whitespace() {
                i += 1;
            } else if c == '-' && chars.get(i + 1) == Some(&'>') {
                out.push((line_no, Tok::Arrow));
                i += 2;
            } else if c == '@'
                && chars
                    .get(i + 1)
                    .is_none_or(|n| n.is_whitespace() || n.is_ascii_digit() || *n == '.')
            {
                out.push((line_no, Tok::At));
                i += 1;
            } else if is_word_char(c) {
                let start = i;
                while i < chars.len()
                    && is_word_char(chars[i])
                    && !(chars[i] == '-' && chars.get(i + 1) == Some(&'>'))
                {
                    i += 1;
                }
                out.push((line_no, Tok::Word(chars[start..i].iter().collect())));
            } else {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("unexpected character '{c}'"),
                });
            }
        }
    }
    Ok(out)
}

/// Parses `"0.25"`, `"1/4"` or `"1e-3"` into a probability in `[0, 1]`.
pub fn parse_prob(s: &str) -> std::result::Result<f64, String> {
    let v = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| format!("bad numerator in '{s}'"))?;
            let d: f64 = d.trim().parse().map_err(|_| format!("bad denominator in '{s}'"))?;
            if d == 0.0 {
                return Err(format!("zero denominator in '{s}'"));
            }
            n / d
        }
        None => s.parse().map_err(|_| format!("bad probability '{s}'"))?,
    };
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("probability {s} outside [0, 1]"));
    }
    Ok(v)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map_or(1, |t| t.0)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line: self.line(),
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.1.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        match self.next() {
            Some(t) if t == want => Ok(()),
            Some(t) => {
                self.pos -= 1;
                self.err(format!("expected {want:?}, found {t:?}"))
            }
            None => self.err(format!("expected {want:?}, found end of input")),
        }
    }

    fn word(&mut self) -> Result<String> {
        match self.next() {
            Some(Tok::Word(w)) => Ok(w),
            Some(t) => {
                self.pos -= 1;
                self.err(format!("expected identifier, found {t:?}"))
            }
            None => self.err("expected identifier, found end of input"),
        }
    }

    fn list(&mut self) -> Result<Vec<String>> {
        self.expect(Tok::LBracket)?;
        let mut out = Vec::new();
        if self.peek() == Some(&Tok::RBracket) {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            out.push(self.word()?);
            match self.next() {
                Some(Tok::Comma) => continue,
                Some(Tok::RBracket) => return Ok(out),
                _ => {
                    self.pos -= 1;
                    return self.err("expected ',' or ']'");
                }
            }
        }
    }
}

type RawBranch = (String, String, f64, usize);

/// Parses a model document.
pub fn parse(src: &str) -> Result<Iihs> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    let mut secrets = None;
    let mut observables = None;
    let mut initial = None;
    let mut mode = None;
    let mut lenient = false;
    let mut blocks: Vec<(usize, String, Vec<Vec<RawBranch>>)> = Vec::new();

    while let Some(tok) = p.peek().cloned() {
        let Tok::Word(key) = tok else {
            return p.err(format!("unexpected {tok:?}"));
        };
        p.pos += 1;
        if key == "state" {
            let line = p.line();
            let id = p.word()?;
            p.expect(Tok::LBrace)?;
            let mut dists = Vec::new();
            while p.peek() != Some(&Tok::RBrace) {
                match p.word()?.as_str() {
                    "dist" => {}
                    other => return p.err(format!("expected 'dist', found '{other}'")),
                }
                p.expect(Tok::LBrace)?;
                let mut d = Vec::new();
                while p.peek() != Some(&Tok::RBrace) {
                    let line = p.line();
                    let label = p.word()?;
                    p.expect(Tok::Arrow)?;
                    let target = p.word()?;
                    p.expect(Tok::At)?;
                    let prob_text = p.word()?;
                    let prob = match parse_prob(&prob_text) {
                        Ok(v) => v,
                        Err(msg) => return Err(Error::Parse { line, msg }),
                    };
                    d.push((label, target, prob, line));
                    match p.peek() {
                        Some(Tok::Comma) => p.pos += 1,
                        Some(Tok::RBrace) => {}
                        _ => return p.err("expected ',' or '}'"),
                    }
                }
                p.expect(Tok::RBrace)?;
                dists.push(d);
            }
            p.expect(Tok::RBrace)?;
            blocks.push((line, id, dists));
            continue;
        }
        p.expect(Tok::Colon)?;
        match key.as_str() {
            "secrets" => secrets = Some(p.list()?),
            "observables" => observables = Some(p.list()?),
            "initial" => initial = Some(p.word()?),
            "mode" => {
                let w = p.word()?;
                mode = Some(w.parse::<Mode>().or_else(|e| p.err(e))?);
            }
            "lenient" => {
                lenient = match p.word()?.as_str() {
                    "true" => true,
                    "false" => false,
                    other => return p.err(format!("expected true or false, found '{other}'")),
                }
            }
            other => return p.err(format!("unknown header key '{other}'")),
        }
    }

    let secrets = secrets.ok_or(Error::Parse {
        line: 1,
        msg: "missing 'secrets' header".into(),
    })?;
    let observables = observables.ok_or(Error::Parse {
        line: 1,
        msg: "missing 'observables' header".into(),
    })?;
    let mut b = IihsBuilder::new(&secrets, &observables)
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .mode(mode.unwrap_or(Mode::FullyProbabilistic))
        .lenient(lenient);
    if let Some(init) = &initial {
        b.state(init);
        b.set_initial(init);
    }
    let mut seen = std::collections::HashSet::new();
    for (line, id, dists) in blocks {
        if !seen.insert(id.clone()) {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate block for state '{id}'"),
            });
        }
        b.state(&id);
        for d in dists {
            for (label, _, _, line) in &d {
                if b.label_id(label).is_none() {
                    return Err(Error::Parse {
                        line: *line,
                        msg: format!("unknown label '{label}'"),
                    });
                }
            }
            let refs: Vec<(&str, &str, f64)> = d
                .iter()
                .map(|(l, t, p, _)| (l.as_str(), t.as_str(), *p))
                .collect();
            b.dist(&id, &refs).map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
        }
    }
    b.build().map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })
}

/// Renders a model in canonical form. `parse(&to_string(m))` rebuilds `m`.
pub fn to_string(m: &Iihs) -> String {
    let mut out = String::new();
    let list = |names: Vec<&str>| names.join(", ");
    let _ = writeln!(
        out,
        "secrets: [{}]",
        list(m.declared(crate::ActionKind::Secret))
    );
    let _ = writeln!(
        out,
        "observables: [{}]",
        list(m.declared(crate::ActionKind::Observable))
    );
    let _ = writeln!(out, "initial: {}", m.state_name(m.initial()));
    let _ = writeln!(out, "mode: {}", m.mode().as_str());
    if m.lenient() {
        let _ = writeln!(out, "lenient: true");
    }
    for s in 0..m.n_states() {
        let ds = m.distributions(s);
        if ds.is_empty() {
            continue;
        }
        let _ = writeln!(out, "\nstate {} {{", m.state_name(s));
        for d in ds {
            let parts: Vec<String> = d
                .iter()
                .map(|b| {
                    format!(
                        "{} -> {} @ {}",
                        m.label_name(b.label),
                        m.state_name(b.target),
                        b.prob
                    )
                })
                .collect();
            let _ = writeln!(out, "  dist {{ {} }}", parts.join(", "));
        }
        out.push_str("}\n");
    }
    out
}
