//! Praat TextGrid reader/writer for interval tiers (long and short text forms).
//!
//! Both forms reduce to the same token stream once keys (`xmin =`,
//! `intervals [3]:`, ...) are skipped, so one sequential reader handles both.

use std::fmt::Write as _;

use super::CorpusError;

#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tier {
    pub name: String,
    pub xmin: f64,
    pub xmax: f64,
    pub intervals: Vec<Interval>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextGrid {
    pub xmin: f64,
    pub xmax: f64,
    pub tiers: Vec<Tier>,
}

impl TextGrid {
    pub fn tier(&self, name: &str) -> Option<&Tier> {
        self.tiers.iter().find(|t| t.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Str(String),
    Num(f64),
    Flag(String),
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.trim_start_matches('\u{feff}').chars().peekable(),
            line: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next();
        if c == Some('\n') {
            self.line += 1;
        }
        c
    }

    fn err(&self, msg: impl Into<String>) -> CorpusError {
        CorpusError::TextGrid {
            line: self.line,
            msg: msg.into(),
        }
    }

    /// Next value token and the line it starts on.
    fn next(&mut self) -> Result<Option<(Tok, usize)>, CorpusError> {
        loop {
            let Some(&c) = self.chars.peek() else {
                return Ok(None);
            };
            let line = self.line;
            match c {
                '"' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            Some('"') => {
                                if self.chars.peek() == Some(&'"') {
                                    self.bump();
                                    s.push('"');
                                } else {
                                    break;
                                }
                            }
                            Some(ch) => s.push(ch),
                            None => {
                                return Err(CorpusError::TextGrid {
                                    line,
                                    msg: "unterminated string".into(),
                                })
                            }
                        }
                    }
                    return Ok(Some((Tok::Str(s), line)));
                }
                '<' => {
                    let mut s = String::new();
                    while let Some(ch) = self.bump() {
                        s.push(ch);
                        if ch == '>' {
                            break;
                        }
                    }
                    return Ok(Some((Tok::Flag(s), line)));
                }
                '[' => {
                    while let Some(ch) = self.bump() {
                        if ch == ']' {
                            break;
                        }
                    }
                }
                '!' => {
                    while let Some(ch) = self.bump() {
                        if ch == '\n' {
                            break;
                        }
                    }
                }
                c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                    let mut s = String::new();
                    while let Some(&ch) = self.chars.peek() {
                        if ch.is_ascii_alphanumeric() || matches!(ch, '.' | '-' | '+') {
                            s.push(ch);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    let v = s
                        .parse::<f64>()
                        .map_err(|_| self.err(format!("bad number {s:?}")))?;
                    return Ok(Some((Tok::Num(v), line)));
                }
                _ => {
                    // whitespace, keys, '=', ':' and '?' carry no values
                    self.bump();
                }
            }
        }
    }
}

struct Reader<'a> {
    lex: Lexer<'a>,
}

impl Reader<'_> {
    fn next(&mut self, what: &str) -> Result<(Tok, usize), CorpusError> {
        self.lex
            .next()?
            .ok_or_else(|| self.lex.err(format!("unexpected end of file, expected {what}")))
    }

    fn num(&mut self, what: &str) -> Result<(f64, usize), CorpusError> {
        match self.next(what)? {
            (Tok::Num(v), l) => Ok((v, l)),
            (t, line) => Err(CorpusError::TextGrid {
                line,
                msg: format!("expected {what}, found {t:?}"),
            }),
        }
    }

    fn string(&mut self, what: &str) -> Result<(String, usize), CorpusError> {
        match self.next(what)? {
            (Tok::Str(s), l) => Ok((s, l)),
            (t, line) => Err(CorpusError::TextGrid {
                line,
                msg: format!("expected {what}, found {t:?}"),
            }),
        }
    }

    fn count(&mut self, what: &str) -> Result<usize, CorpusError> {
        let (v, line) = self.num(what)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(CorpusError::TextGrid {
                line,
                msg: format!("{what} must be a non-negative integer, found {v}"),
            });
        }
        Ok(v as usize)
    }
}

/// Parses TextGrid text. Only interval tiers are accepted.
pub fn parse_textgrid(text: &str) -> Result<TextGrid, CorpusError> {
    let first = text
        .trim_start_matches('\u{feff}')
        .lines()
        .next()
        .unwrap_or("");
    if !(first.contains("File type") && first.contains("ooTextFile")) {
        return Err(CorpusError::TextGrid {
            line: 1,
            msg: "not a TextGrid: missing `File type = \"ooTextFile\"` header".into(),
        });
    }
    let mut r = Reader {
        lex: Lexer::new(text),
    };
    r.string("file type")?;
    let (class, line) = r.string("object class")?;
    if class != "TextGrid" {
        return Err(CorpusError::TextGrid {
            line,
            msg: format!("object class {class:?} is not TextGrid"),
        });
    }
    let (xmin, _) = r.num("xmin")?;
    let (xmax, _) = r.num("xmax")?;
    let n_tiers = match r.next("tiers flag")? {
        (Tok::Flag(f), _) if f == "<exists>" => r.count("tier count")?,
        (Tok::Flag(f), _) if f == "<absent>" => 0,
        (t, line) => {
            return Err(CorpusError::TextGrid {
                line,
                msg: format!("expected <exists> or <absent>, found {t:?}"),
            })
        }
    };
    let mut tiers = Vec::with_capacity(n_tiers);
    for _ in 0..n_tiers {
        let (class, line) = r.string("tier class")?;
        match class.as_str() {
            "IntervalTier" => {}
            "TextTier" => {
                return Err(CorpusError::TextGrid {
                    line,
                    msg: "point tiers (TextTier) are not supported".into(),
                })
            }
            other => {
                return Err(CorpusError::TextGrid {
                    line,
                    msg: format!("unknown tier class {other:?}"),
                })
            }
        }
        let (name, _) = r.string("tier name")?;
        let (tmin, _) = r.num("tier xmin")?;
        let (tmax, _) = r.num("tier xmax")?;
        let n = r.count("interval count")?;
        let mut intervals: Vec<Interval> = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let (start_s, line) = r.num("interval xmin")?;
            let (end_s, _) = r.num("interval xmax")?;
            let (label, _) = r.string("interval text")?;
            if end_s < start_s {
                return Err(CorpusError::TextGrid {
                    line,
                    msg: format!("interval ends before it starts ({start_s} > {end_s})"),
                });
            }
            if let Some(prev) = intervals.last() {
                if start_s < prev.end_s - 1e-9 {
                    return Err(CorpusError::TextGrid {
                        line,
                        msg: format!(
                            "interval starting at {start_s} overlaps previous ending at {}",
                            prev.end_s
                        ),
                    });
                }
            }
            intervals.push(Interval {
                start_s,
                end_s,
                label,
            });
        }
        tiers.push(Tier {
            name,
            xmin: tmin,
            xmax: tmax,
            intervals,
        });
    }
    Ok(TextGrid { xmin, xmax, tiers })
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// Writes the long text form. Floats use the shortest round-trip repr.
pub fn to_long_text(tg: &TextGrid) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "File type = \"ooTextFile\"");
    let _ = writeln!(s, "Object class = \"TextGrid\"\n");
    let _ = writeln!(s, "xmin = {:?} ", tg.xmin);
    let _ = writeln!(s, "xmax = {:?} ", tg.xmax);
    let _ = writeln!(s, "tiers? <exists> ");
    let _ = writeln!(s, "size = {} ", tg.tiers.len());
    let _ = writeln!(s, "item []: ");
    for (i, t) in tg.tiers.iter().enumerate() {
        let _ = writeln!(s, "    item [{}]:", i + 1);
        let _ = writeln!(s, "        class = \"IntervalTier\" ");
        let _ = writeln!(s, "        name = {} ", quote(&t.name));
        let _ = writeln!(s, "        xmin = {:?} ", t.xmin);
        let _ = writeln!(s, "        xmax = {:?} ", t.xmax);
        let _ = writeln!(s, "        intervals: size = {} ", t.intervals.len());
        for (j, iv) in t.intervals.iter().enumerate() {
            let _ = writeln!(s, "        intervals [{}]:", j + 1);
            let _ = writeln!(s, "            xmin = {:?} ", iv.start_s);
            let _ = writeln!(s, "            xmax = {:?} ", iv.end_s);
            let _ = writeln!(s, "            text = {} ", quote(&iv.label));
        }
    }
    s
}

/// Writes the short text form.
pub fn to_short_text(tg: &TextGrid) -> String {
    let mut s = String::from("File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n\n");
    let _ = writeln!(s, "{:?}\n{:?}\n<exists>\n{}", tg.xmin, tg.xmax, tg.tiers.len());
    for t in &tg.tiers {
        let _ = writeln!(s, "\"IntervalTier\"\n{}\n{:?}\n{:?}\n{}", quote(&t.name), t.xmin, t.xmax, t.intervals.len());
        for iv in &t.intervals {
            let _ = writeln!(s, "{:?}\n{:?}\n{}", iv.start_s, iv.end_s, quote(&iv.label));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const LONG: &str = r#"File type = "ooTextFile"
Object class = "TextGrid"

xmin = 0 
xmax = 0.3 
tiers? <exists> 
size = 2 
item []: 
    item [1]:
        class = "IntervalTier" 
        name = "phones" 
        xmin = 0 
        xmax = 0.3 
        intervals: size = 2 
        intervals [1]:
            xmin = 0.00 
            xmax = 0.10 
            text = "b" 
        intervals [2]:
            xmin = 0.10 
            xmax = 0.30 
            text = "o" 
    item [2]:
        class = "IntervalTier" 
        name = "empty" 
        xmin = 0 
        xmax = 0.3 
        intervals: size = 0 
"#;

    #[test]
    fn long_form_fixture() {
        let tg = parse_textgrid(LONG).unwrap();
        assert_eq!(tg.tiers.len(), 2);
        let p = tg.tier("phones").unwrap();
        assert_eq!(
            p.intervals,
            vec![
                Interval { start_s: 0.0, end_s: 0.1, label: "b".into() },
                Interval { start_s: 0.1, end_s: 0.3, label: "o".into() },
            ]
        );
        assert!(tg.tier("empty").unwrap().intervals.is_empty());
    }

    #[test]
    fn short_form_matches_long_form() {
        let tg = parse_textgrid(LONG).unwrap();
        let short = to_short_text(&tg);
        assert_eq!(parse_textgrid(&short).unwrap(), tg);
    }

    #[test]
    fn quotes_inside_labels() {
        let mut tg = parse_textgrid(LONG).unwrap();
        tg.tiers[0].intervals[0].label = "say \"hi\" = ok".into();
        assert_eq!(parse_textgrid(&to_long_text(&tg)).unwrap(), tg);
    }

    #[test]
    fn header_error_is_line_one() {
        let e = parse_textgrid("hello\nworld").unwrap_err();
        assert!(matches!(e, CorpusError::TextGrid { line: 1, .. }), "{e}");
    }

    #[test]
    fn point_tier_rejected_with_line() {
        let text = LONG.replacen("\"IntervalTier\"", "\"TextTier\"", 1);
        match parse_textgrid(&text).unwrap_err() {
            CorpusError::TextGrid { line, msg } => {
                assert_eq!(line, 10);
                assert!(msg.contains("point tier"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn overlapping_intervals_rejected() {
        let text = LONG.replace("xmin = 0.10 \n            xmax = 0.30", "xmin = 0.05 \n            xmax = 0.30");
        match parse_textgrid(&text).unwrap_err() {
            CorpusError::TextGrid { line, .. } => assert_eq!(line, 20),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn truncated_file() {
        let cut = &LONG[..LONG.find("intervals [2]").unwrap()];
        assert!(parse_textgrid(cut).is_err());
    }
}
