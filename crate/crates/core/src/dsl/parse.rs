use std::fmt;

use thiserror::Error;

use super::{validate_spec, ConstraintRule, Diagnostic, FunctionDef, OutlineSpec, DEFAULT_NUM_SCENES};

/// Location and shape of a syntax error. Line and column are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: expected {}, found {}",
            self.line,
            self.column,
            self.expected.join(" or "),
            self.found
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {0}")]
    Syntax(SyntaxError),
    #[error("line {line}: duplicate `scenes` statement")]
    DuplicateScenes { line: usize },
    #[error("invalid spec: {}", join_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
}

fn join_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok<'a> {
    Ident(&'a str),
    Int(u64),
    LBracket,
    RBracket,
    Comma,
    End,
}

impl fmt::Display for Tok<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::End => f.write_str("end of line"),
        }
    }
}

/// Tokens of one line, each with its 1-based column.
struct Line<'a> {
    number: usize,
    toks: Vec<(usize, Tok<'a>)>,
    end_col: usize,
    pos: usize,
}

impl<'a> Line<'a> {
    fn lex(number: usize, text: &'a str) -> Result<Self, SyntaxError> {
        let text = match text.find('#') {
            Some(i) => &text[..i],
            None => text,
        };
        let mut toks = Vec::new();
        let bytes = text.as_bytes();
        let mut i = 0;
        // columns count chars, not bytes
        let col = |byte: usize| text[..byte].chars().count() + 1;
        while i < bytes.len() {
            let c = bytes[i];
            match c {
                b' ' | b'\t' | b'\r' => i += 1,
                b'[' => {
                    toks.push((col(i), Tok::LBracket));
                    i += 1;
                }
                b']' => {
                    toks.push((col(i), Tok::RBracket));
                    i += 1;
                }
                b',' => {
                    toks.push((col(i), Tok::Comma));
                    i += 1;
                }
                b'a'..=b'z' => {
                    let start = i;
                    while i < bytes.len() && matches!(bytes[i], b'a'..=b'z' | b'0'..=b'9' | b'_') {
                        i += 1;
                    }
                    toks.push((col(start), Tok::Ident(&text[start..i])));
                }
                b'0'..=b'9' => {
                    let start = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    let n = text[start..i].parse::<u64>().map_err(|_| SyntaxError {
                        line: number,
                        column: col(start),
                        expected: vec!["integer that fits in 64 bits".into()],
                        found: format!("`{}`", &text[start..i]),
                    })?;
                    toks.push((col(start), Tok::Int(n)));
                }
                _ => {
                    let ch = text[i..].chars().next().unwrap_or('?');
                    return Err(SyntaxError {
                        line: number,
                        column: col(i),
                        expected: vec!["identifier".into(), "integer".into(), "`[`, `]` or `,`".into()],
                        found: format!("`{ch}`"),
                    });
                }
            }
        }
        Ok(Self {
            number,
            toks,
            end_col: text.trim_end().chars().count() + 1,
            pos: 0,
        })
    }

    fn peek(&self) -> (usize, Tok<'a>) {
        self.toks
            .get(self.pos)
            .cloned()
            .unwrap_or((self.end_col, Tok::End))
    }

    fn bump(&mut self) -> (usize, Tok<'a>) {
        let t = self.peek();
        self.pos += 1;
        t
    }

    fn error(&self, column: usize, found: &Tok<'_>, expected: &[&str]) -> SyntaxError {
        SyntaxError {
            line: self.number,
            column,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: found.to_string(),
        }
    }

    fn ident(&mut self) -> Result<&'a str, SyntaxError> {
        match self.bump() {
            (_, Tok::Ident(s)) => Ok(s),
            (col, t) => Err(self.error(col, &t, &["identifier"])),
        }
    }

    fn int(&mut self) -> Result<u64, SyntaxError> {
        match self.bump() {
            (_, Tok::Int(n)) => Ok(n),
            (col, t) => Err(self.error(col, &t, &["integer"])),
        }
    }

    fn int_as<T: TryFrom<u64>>(&mut self) -> Result<T, SyntaxError> {
        let (col, tok) = self.peek();
        let n = self.int()?;
        T::try_from(n).map_err(|_| self.error(col, &tok, &["smaller integer"]))
    }

    fn expect(&mut self, want: Tok<'static>) -> Result<(), SyntaxError> {
        let (col, t) = self.bump();
        if t == want {
            Ok(())
        } else {
            Err(self.error(col, &t, &[&want.to_string()]))
        }
    }

    fn finish(&mut self) -> Result<(), SyntaxError> {
        match self.bump() {
            (_, Tok::End) => Ok(()),
            (col, t) => Err(self.error(col, &t, &["end of line"])),
        }
    }
}

const CONSTRAINT_KINDS: &[&str] = &[
    "`no_adjacent_repeat`",
    "`require_count_before`",
    "`at_most`",
    "`at_least`",
    "`forbid_at`",
    "`require_at`",
    "`first_precedes`",
    "`distinct_params`",
];

/// Parses DSL source into a spec.
///
/// The result is rejected if [`validate_spec`] reports anything, so a value
/// returned from here always satisfies the spec invariants.
pub fn parse_spec(source: &str) -> Result<OutlineSpec, ParseError> {
    let mut num_scenes = None;
    let mut functions = Vec::new();
    let mut constraints = Vec::new();

    for (idx, raw) in source.lines().enumerate() {
        let mut line = Line::lex(idx + 1, raw).map_err(ParseError::Syntax)?;
        let (col, head) = line.bump();
        match head {
            Tok::End => continue,
            Tok::Ident("scenes") => {
                let n = line.int_as::<usize>().map_err(ParseError::Syntax)?;
                line.finish().map_err(ParseError::Syntax)?;
                if num_scenes.replace(n).is_some() {
                    return Err(ParseError::DuplicateScenes { line: idx + 1 });
                }
            }
            Tok::Ident("function") => {
                let def = function_decl(&mut line).map_err(ParseError::Syntax)?;
                functions.push(def);
            }
            Tok::Ident("constraint") => {
                let rule = constraint(&mut line).map_err(ParseError::Syntax)?;
                constraints.push(rule);
            }
            other => {
                return Err(ParseError::Syntax(line.error(
                    col,
                    &other,
                    &["`scenes`", "`function`", "`constraint`"],
                )))
            }
        }
    }

    let spec = OutlineSpec {
        num_scenes: num_scenes.unwrap_or(DEFAULT_NUM_SCENES),
        functions,
        constraints,
    };
    let diagnostics = validate_spec(&spec);
    if diagnostics.is_empty() {
        Ok(spec)
    } else {
        Err(ParseError::Invalid(diagnostics))
    }
}

fn function_decl(line: &mut Line<'_>) -> Result<FunctionDef, SyntaxError> {
    let name = line.ident()?;
    let mut params = Vec::new();
    match line.bump() {
        (_, Tok::End) => return Ok(FunctionDef::new(name)),
        (_, Tok::Ident("params")) => {}
        (col, t) => return Err(line.error(col, &t, &["`params`", "end of line"])),
    }
    line.expect(Tok::LBracket)?;
    params.push(line.ident()?.to_string());
    loop {
        match line.bump() {
            (_, Tok::Comma) => params.push(line.ident()?.to_string()),
            (_, Tok::RBracket) => break,
            (col, t) => return Err(line.error(col, &t, &["`,`", "`]`"])),
        }
    }
    line.finish()?;
    Ok(FunctionDef {
        name: name.to_string(),
        params,
    })
}

fn constraint(line: &mut Line<'_>) -> Result<ConstraintRule, SyntaxError> {
    let (col, kind) = line.bump();
    let name = |s: &str| s.to_string();
    let rule = match kind {
        Tok::Ident("no_adjacent_repeat") => ConstraintRule::NoAdjacentRepeat,
        Tok::Ident("require_count_before") => ConstraintRule::RequireCountBefore {
            function: name(line.ident()?),
            prior: name(line.ident()?),
            min_count: line.int_as()?,
        },
        Tok::Ident("at_most") => ConstraintRule::AtMost {
            function: name(line.ident()?),
            max: line.int_as()?,
        },
        Tok::Ident("at_least") => ConstraintRule::AtLeast {
            function: name(line.ident()?),
            min: line.int_as()?,
        },
        Tok::Ident("forbid_at") => ConstraintRule::ForbidAtScene {
            function: name(line.ident()?),
            scene: line.int_as()?,
        },
        Tok::Ident("require_at") => ConstraintRule::RequireAtScene {
            function: name(line.ident()?),
            scene: line.int_as()?,
        },
        Tok::Ident("first_precedes") => ConstraintRule::FirstPrecedes {
            first: name(line.ident()?),
            then: name(line.ident()?),
        },
        Tok::Ident("distinct_params") => ConstraintRule::DistinctParams {
            function: name(line.ident()?),
        },
        other => return Err(line.error(col, &other, CONSTRAINT_KINDS)),
    };
    line.finish()?;
    Ok(rule)
}
