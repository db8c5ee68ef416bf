//! Parser for universal-algebra presentations and balance analysis.
//!
//! The source format is line-oriented UTF-8:
//!
//! ```text
//! # comment
//! gen U unitary;
//! gen s1 isometry;
//! rel U U* - 1;
//! rel 2 * U V - 1i * Z V U;
//! ```
//!
//! A relation is a +/- separated sum of terms; a term is an optional
//! coefficient (`2`, `0.5`, `1i`, `2.5i`) followed by `*` and a sequence of
//! factors `name` or `name*`; the bare literal `1` denotes the empty word.

use std::fmt;

use crate::error::{Error, Result};
use crate::opcore::{c, cr, C64};

use super::word::{FreeElement, Letter, Word};

/// Declared property of a generator (metadata; relations stay explicit).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorFlag {
    None,
    Unitary,
    Isometry,
}

/// A parsed presentation: named generators, flags and relation polynomials.
#[derive(Debug, Clone)]
pub struct Presentation {
    pub generators: Vec<String>,
    pub flags: Vec<GeneratorFlag>,
    pub relations: Vec<FreeElement>,
}

impl Presentation {
    pub fn generator_index(&self, name: &str) -> Option<usize> {
        self.generators.iter().position(|g| g == name)
    }
}

/// Outcome of a balance check for one generator.
#[derive(Debug, Clone)]
pub struct BalanceReport {
    pub balanced: bool,
    /// A violating pair: relation index and two monomials with different
    /// signed counts.
    pub witness: Option<(usize, Word, Word)>,
}

/// A generator is balanced when its signed count is constant across the
/// monomials of every relation.
pub fn balance_check(pres: &Presentation, j: usize) -> Result<BalanceReport> {
    if j >= pres.generators.len() {
        return Err(Error::Range(format!(
            "generator index {j} out of range ({} declared)",
            pres.generators.len()
        )));
    }
    for (idx, rel) in pres.relations.iter().enumerate() {
        let mut first: Option<(&Word, i64)> = None;
        for (w, _) in rel.terms() {
            let n = w.n_count(j);
            match first {
                None => first = Some((w, n)),
                Some((w0, n0)) => {
                    if n != n0 {
                        return Ok(BalanceReport {
                            balanced: false,
                            witness: Some((idx, w0.clone(), w.clone())),
                        });
                    }
                }
            }
        }
    }
    Ok(BalanceReport {
        balanced: true,
        witness: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident { name: String, starred: bool },
    Number { value: f64, imaginary: bool },
    Plus,
    Minus,
    Star,
    Semi,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident { name, starred } => {
                write!(f, "{name}{}", if *starred { "*" } else { "" })
            }
            Tok::Number { value, imaginary } => {
                write!(f, "{value}{}", if *imaginary { "i" } else { "" })
            }
            Tok::Plus => write!(f, "+"),
            Tok::Minus => write!(f, "-"),
            Tok::Star => write!(f, "*"),
            Tok::Semi => write!(f, ";"),
        }
    }
}

fn err(line: usize, col: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column: col,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    for (lno, line) in text.lines().enumerate() {
        let line = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        };
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let ch = chars[i];
            let col = i + 1;
            if ch.is_whitespace() {
                i += 1;
                continue;
            }
            match ch {
                '+' => out.push(Spanned { tok: Tok::Plus, line: lno + 1, col }),
                '-' => out.push(Spanned { tok: Tok::Minus, line: lno + 1, col }),
                ';' => out.push(Spanned { tok: Tok::Semi, line: lno + 1, col }),
                '*' => out.push(Spanned { tok: Tok::Star, line: lno + 1, col }),
                _ if ch.is_ascii_digit() || ch == '.' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                        i += 1;
                    }
                    let text: String = chars[start..i].iter().collect();
                    let value: f64 = text
                        .parse()
                        .map_err(|_| err(lno + 1, col, format!("bad number literal '{text}'")))?;
                    let imaginary = i < chars.len() && chars[i] == 'i' && {
                        // 'i' binds to the number only when not starting an identifier
                        let next = chars.get(i + 1);
                        !matches!(next, Some(c2) if c2.is_alphanumeric() || *c2 == '_')
                    };
                    if imaginary {
                        i += 1;
                    }
                    out.push(Spanned {
                        tok: Tok::Number { value, imaginary },
                        line: lno + 1,
                        col,
                    });
                    continue;
                }
                _ if ch.is_alphanumeric() || ch == '_' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                        i += 1;
                    }
                    let name: String = chars[start..i].iter().collect();
                    // a star glued to the name is the adjoint marker
                    let starred = i < chars.len() && chars[i] == '*';
                    if starred {
                        i += 1;
                    }
                    out.push(Spanned {
                        tok: Tok::Ident { name, starred },
                        line: lno + 1,
                        col,
                    });
                    continue;
                }
                _ => return Err(err(lno + 1, col, format!("unexpected character '{ch}'"))),
            }
            i += 1;
        }
    }
    Ok(out)
}

/// Parses a presentation source; errors carry line and column.
pub fn parse_presentation(text: &str) -> Result<Presentation> {
    let toks = tokenize(text)?;
    let mut pres = Presentation {
        generators: Vec::new(),
        flags: Vec::new(),
        relations: Vec::new(),
    };
    let mut i = 0;
    while i < toks.len() {
        let head = &toks[i];
        let keyword = match &head.tok {
            Tok::Ident { name, starred: false } => name.as_str(),
            other => {
                return Err(err(head.line, head.col, format!("expected 'gen' or 'rel', found '{other}'")))
            }
        };
        match keyword {
            "gen" => {
                i += 1;
                let (name, line, col) = match toks.get(i) {
                    Some(Spanned { tok: Tok::Ident { name, starred: false }, line, col }) => {
                        (name.clone(), *line, *col)
                    }
                    Some(s) => {
                        return Err(err(s.line, s.col, format!("expected generator name, found '{}'", s.tok)))
                    }
                    None => return Err(err(head.line, head.col, "unterminated 'gen' statement")),
                };
                if pres.generator_index(&name).is_some() {
                    return Err(err(line, col, format!("generator '{name}' declared twice")));
                }
                i += 1;
                let mut flag = GeneratorFlag::None;
                if let Some(Spanned { tok: Tok::Ident { name: f, starred: false }, line, col }) = toks.get(i)
                {
                    flag = match f.as_str() {
                        "unitary" => GeneratorFlag::Unitary,
                        "isometry" => GeneratorFlag::Isometry,
                        other => {
                            return Err(err(*line, *col, format!("unknown generator flag '{other}'")))
                        }
                    };
                    i += 1;
                }
                match toks.get(i) {
                    Some(Spanned { tok: Tok::Semi, .. }) => i += 1,
                    Some(s) => return Err(err(s.line, s.col, "expected ';' after generator declaration")),
                    None => return Err(err(head.line, head.col, "missing ';' after generator declaration")),
                }
                pres.generators.push(name);
                pres.flags.push(flag);
            }
            "rel" => {
                i += 1;
                let (poly, consumed) = parse_polynomial(&toks[i..], &pres, head.line, head.col)?;
                i += consumed;
                pres.relations.push(poly);
            }
            other => {
                return Err(err(head.line, head.col, format!("expected 'gen' or 'rel', found '{other}'")))
            }
        }
    }
    Ok(pres)
}

/// Parses one polynomial up to and including the ';'.
fn parse_polynomial(
    toks: &[Spanned],
    pres: &Presentation,
    stmt_line: usize,
    stmt_col: usize,
) -> Result<(FreeElement, usize)> {
    let mut poly = FreeElement::zero();
    let mut i = 0;
    let mut sign = cr(1.0);
    let mut expect_term = true;
    loop {
        let Some(s) = toks.get(i) else {
            return Err(err(stmt_line, stmt_col, "missing ';' after relation"));
        };
        match &s.tok {
            Tok::Semi => {
                if expect_term {
                    return Err(err(s.line, s.col, "relation ends with a dangling sign"));
                }
                i += 1;
                break;
            }
            Tok::Plus if !expect_term => {
                sign = cr(1.0);
                expect_term = true;
                i += 1;
            }
            Tok::Minus if !expect_term => {
                sign = cr(-1.0);
                expect_term = true;
                i += 1;
            }
            Tok::Minus if expect_term => {
                // leading or doubled minus
                sign = -sign;
                i += 1;
            }
            _ if expect_term => {
                let (word, coeff, used) = parse_term(&toks[i..], pres)?;
                poly.add_term(word, coeff * sign);
                sign = cr(1.0);
                expect_term = false;
                i += used;
            }
            other => {
                return Err(err(s.line, s.col, format!("unexpected '{other}' in relation")))
            }
        }
    }
    Ok((poly, i))
}

/// One term: optional coefficient, optional '*', factors.
fn parse_term(toks: &[Spanned], pres: &Presentation) -> Result<(Word, C64, usize)> {
    let mut i = 0;
    let mut coeff = cr(1.0);
    if let Some(Spanned { tok: Tok::Number { value, imaginary }, .. }) = toks.get(i) {
        coeff = if *imaginary { c(0.0, *value) } else { cr(*value) };
        i += 1;
        if matches!(toks.get(i).map(|s| &s.tok), Some(Tok::Star)) {
            i += 1;
        } else {
            // bare scalar term such as '1'
            return Ok((Word::identity(), coeff, i));
        }
    }
    let mut letters = Vec::new();
    while let Some(Spanned { tok: Tok::Ident { name, starred }, line, col }) = toks.get(i) {
        let gen = pres
            .generator_index(name)
            .ok_or_else(|| err(*line, *col, format!("undeclared generator '{name}'")))?;
        letters.push(Letter { gen, starred: *starred });
        i += 1;
    }
    if letters.is_empty() {
        let s = toks.get(i).expect("caller guarantees a token");
        return Err(err(s.line, s.col, format!("expected a factor, found '{}'", s.tok)));
    }
    Ok((Word(letters), coeff, i))
}

/// Rotation-algebra presentation (generators U, V, Z; nine relations).
pub fn rotation_algebra_source() -> &'static str {
    include_str!("../../presentations/rotation_algebra.qsp")
}

/// Cuntz algebra O_N source, N >= 1.
pub fn cuntz_source(n: usize) -> String {
    let mut out = String::from("# Cuntz algebra O_N: isometries with sum s_i s_i* = 1\n");
    for i in 1..=n {
        out.push_str(&format!("gen s{i} isometry;\n"));
    }
    for i in 1..=n {
        out.push_str(&format!("rel s{i}* s{i} - 1;\n"));
    }
    let sum: Vec<String> = (1..=n).map(|i| format!("s{i} s{i}*")).collect();
    out.push_str(&format!("rel {} - 1;\n", sum.join(" + ")));
    out
}

/// The sphere presentations whose balance structure the tool classifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphereKind {
    /// Free complex sphere.
    Free,
    /// Twisted complex sphere.
    Twisted,
    /// Half-liberated complex sphere.
    HalfLiberated,
    /// Twisted half-liberated complex sphere.
    TwistedHalfLiberated,
    /// Real sphere with self-adjoint generators.
    Real,
}

impl SphereKind {
    pub fn slug(&self) -> &'static str {
        match self {
            SphereKind::Free => "free-sphere",
            SphereKind::Twisted => "twisted-sphere",
            SphereKind::HalfLiberated => "half-liberated-sphere",
            SphereKind::TwistedHalfLiberated => "twisted-half-liberated-sphere",
            SphereKind::Real => "real-sphere",
        }
    }
}

/// Source text of a sphere presentation on `n` generators.
pub fn sphere_source(kind: SphereKind, n: usize) -> String {
    let mut out = String::new();
    let gen_name = |i: usize| {
        if kind == SphereKind::Real {
            format!("x{}", i + 1)
        } else {
            format!("z{}", i + 1)
        }
    };
    out.push_str(&format!("# {} on {n} generators\n", kind.slug()));
    for i in 0..n {
        out.push_str(&format!("gen {};\n", gen_name(i)));
    }
    if kind == SphereKind::Real {
        for i in 0..n {
            let g = gen_name(i);
            out.push_str(&format!("rel {g} - {g}*;\n"));
        }
        let sum: Vec<String> = (0..n).map(|i| format!("{0} {0}", gen_name(i))).collect();
        out.push_str(&format!("rel {} - 1;\n", sum.join(" + ")));
        return out;
    }
    let sum_right: Vec<String> = (0..n).map(|i| format!("{0} {0}*", gen_name(i))).collect();
    let sum_left: Vec<String> = (0..n).map(|i| format!("{0}* {0}", gen_name(i))).collect();
    out.push_str(&format!("rel {} - 1;\n", sum_right.join(" + ")));
    out.push_str(&format!("rel {} - 1;\n", sum_left.join(" + ")));
    // letters: (generator index, starred)
    let letter = |i: usize, starred: bool| format!("{}{}", gen_name(i), if starred { "*" } else { "" });
    match kind {
        SphereKind::Twisted => {
            for i in 0..n {
                out.push_str(&format!(
                    "rel {} {} - {} {};\n",
                    letter(i, false),
                    letter(i, true),
                    letter(i, true),
                    letter(i, false)
                ));
            }
            for i in 0..n {
                for jj in (i + 1)..n {
                    for (si, sj) in [(false, false), (false, true), (true, false), (true, true)] {
                        out.push_str(&format!(
                            "rel {} {} + {} {};\n",
                            letter(i, si),
                            letter(jj, sj),
                            letter(jj, sj),
                            letter(i, si)
                        ));
                    }
                }
            }
        }
        SphereKind::HalfLiberated | SphereKind::TwistedHalfLiberated => {
            // abc = +/- cba over all letters; sign -1 only for the twisted
            // version with three distinct underlying generators
            let letters: Vec<(usize, bool)> = (0..n)
                .flat_map(|i| [(i, false), (i, true)])
                .collect();
            for (ai, a) in letters.iter().enumerate() {
                for b in &letters {
                    for (ci, cl) in letters.iter().enumerate() {
                        if ci <= ai {
                            continue;
                        }
                        let distinct = a.0 != b.0 && b.0 != cl.0 && a.0 != cl.0;
                        let sign = if kind == SphereKind::TwistedHalfLiberated && distinct {
                            "+"
                        } else {
                            "-"
                        };
                        out.push_str(&format!(
                            "rel {} {} {} {sign} {} {} {};\n",
                            letter(a.0, a.1),
                            letter(b.0, b.1),
                            letter(cl.0, cl.1),
                            letter(cl.0, cl.1),
                            letter(b.0, b.1),
                            letter(a.0, a.1)
                        ));
                    }
                }
            }
        }
        _ => {}
    }
    out
}
