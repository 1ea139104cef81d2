//! Plain-text formats for models, decompositions, values and policies.
//!
//! Model files:
//!
//! ```text
//! mdp <states> <beta> <maximize|minimize>
//! action <id> <name>
//! row <state> <action> <reward> <stochastic|macro> <succ>:<prob> ...
//! ```
//!
//! Decomposition files: `regions <count>` followed by one label per state,
//! whitespace separated. Lines starting with `#` are comments everywhere.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::decomposition::Decomposition;
use crate::error::{Error, Result};
use crate::mdp::{Choice, Mdp, Objective, Policy, RowClass, ValueFunction};

/// A whitespace-separated token with its 1-based position.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Token<'a> {
    pub text: &'a str,
    pub line: usize,
    pub column: usize,
}

impl Token<'_> {
    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    pub fn parse<T: FromStr>(&self, what: &str) -> Result<T> {
        self.text
            .parse()
            .map_err(|_| self.error(format!("expected {what}, found `{}`", self.text)))
    }

    pub fn parse_f64(&self, what: &str) -> Result<f64> {
        let v: f64 = self.parse(what)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.error(format!("{what} must be finite")))
        }
    }
}

/// Tokens of every non-comment line, grouped per line.
pub(crate) fn tokenize(text: &str) -> Vec<Vec<Token<'_>>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = Vec::new();
        let mut start = None;
        for (j, ch) in raw.char_indices().chain(std::iter::once((raw.len(), ' '))) {
            if ch.is_whitespace() {
                if let Some(b) = start.take() {
                    tokens.push(Token {
                        text: &raw[b..j],
                        line: i + 1,
                        column: raw[..b].chars().count() + 1,
                    });
                }
            } else if start.is_none() {
                start = Some(j);
            }
        }
        out.push(tokens);
    }
    out
}

fn end_error(text: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        line: text.lines().count().max(1),
        column: 1,
        message: message.into(),
    }
}

fn expect_len(line: &[Token<'_>], min: usize, usage: &str) -> Result<()> {
    if line.len() < min {
        let last = line.last().expect("lines are nonempty");
        return Err(Error::Parse {
            line: last.line,
            column: last.column + last.text.chars().count(),
            message: format!("expected `{usage}`"),
        });
    }
    Ok(())
}

pub fn parse_mdp(text: &str) -> Result<Mdp> {
    let lines = tokenize(text);
    let mut iter = lines.iter();
    let header = iter.next().ok_or_else(|| end_error(text, "empty model file"))?;
    if header[0].text != "mdp" {
        return Err(header[0].error("expected `mdp <states> <beta> <maximize|minimize>`"));
    }
    expect_len(header, 4, "mdp <states> <beta> <maximize|minimize>")?;
    let n: usize = header[1].parse("state count")?;
    let beta = header[2].parse_f64("discount")?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(header[2].error("discount must lie in (0, 1)"));
    }
    let objective = Objective::from_keyword(header[3].text)
        .ok_or_else(|| header[3].error("expected `maximize` or `minimize`"))?;
    if let Some(extra) = header.get(4) {
        return Err(extra.error("unexpected token"));
    }

    let mut names: Vec<Option<String>> = Vec::new();
    let mut choices: Vec<Vec<Choice>> = vec![Vec::new(); n];
    let mut row_lines: Vec<(usize, usize, Token<'_>)> = Vec::new();
    for line in iter {
        match line[0].text {
            "action" => {
                expect_len(line, 3, "action <id> <name>")?;
                let id: usize = line[1].parse("action id")?;
                if id >= names.len() {
                    names.resize(id + 1, None);
                }
                if names[id].is_some() {
                    return Err(line[1].error(format!("action {id} declared twice")));
                }
                if let Some(extra) = line.get(3) {
                    return Err(extra.error("action names cannot contain whitespace"));
                }
                names[id] = Some(line[2].text.to_string());
            }
            "row" => {
                expect_len(line, 6, "row <state> <action> <reward> <stochastic|macro> <succ>:<prob> ...")?;
                let s: usize = line[1].parse("state")?;
                if s >= n {
                    return Err(line[1].error(format!("state {s} out of range (model has {n})")));
                }
                let a: usize = line[2].parse("action id")?;
                let reward = line[3].parse_f64("reward")?;
                let class = RowClass::from_keyword(line[4].text)
                    .ok_or_else(|| line[4].error("expected `stochastic` or `macro`"))?;
                let mut succ = Vec::with_capacity(line.len() - 5);
                for tok in &line[5..] {
                    let (t, p) = tok
                        .text
                        .split_once(':')
                        .ok_or_else(|| tok.error("expected `<state>:<probability>`"))?;
                    let t: usize = t.parse().map_err(|_| tok.error("invalid successor state"))?;
                    if t >= n {
                        return Err(tok.error(format!("successor {t} out of range (model has {n})")));
                    }
                    let p: f64 = p.parse().map_err(|_| tok.error("invalid probability"))?;
                    if !(p.is_finite() && p >= 0.0) {
                        return Err(tok.error("probabilities must be finite and nonnegative"));
                    }
                    succ.push((t, p));
                }
                if choices[s].iter().any(|c| c.action == a) {
                    return Err(line[2].error(format!("state {s} lists action {a} twice")));
                }
                row_lines.push((s, a, line[2]));
                choices[s].push(Choice::new(a, reward, succ, class));
            }
            other => return Err(line[0].error(format!("unknown directive `{other}`"))),
        }
    }
    for (s, a, tok) in &row_lines {
        if names.get(*a).is_none_or(Option::is_none) {
            return Err(tok.error(format!("row at state {s} uses undeclared action {a}")));
        }
    }
    if let Some(id) = names.iter().position(Option::is_none) {
        return Err(end_error(text, format!("action id {id} is not declared")));
    }
    if let Some(s) = choices.iter().position(Vec::is_empty) {
        return Err(end_error(text, format!("state {s} has no rows")));
    }
    let names = names.into_iter().map(|n| n.expect("checked")).collect();
    Mdp::new(beta, objective, names, choices)
}

pub fn format_mdp(mdp: &Mdp) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "mdp {} {} {}",
        mdp.state_count(),
        mdp.beta(),
        mdp.objective().keyword()
    )
    .unwrap();
    for (id, name) in mdp.action_names().iter().enumerate() {
        writeln!(out, "action {id} {name}").unwrap();
    }
    for s in 0..mdp.state_count() {
        for c in mdp.choices(s) {
            write!(out, "row {s} {} {} {}", c.action, c.reward, c.class.keyword()).unwrap();
            for &(t, p) in &c.successors {
                write!(out, " {t}:{p}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

pub fn parse_decomposition(text: &str, state_count: Option<usize>) -> Result<Decomposition> {
    let lines = tokenize(text);
    let mut tokens = lines.iter().flatten();
    let head = tokens.next().ok_or_else(|| end_error(text, "empty decomposition file"))?;
    if head.text != "regions" {
        return Err(head.error("expected `regions <count>`"));
    }
    let count_tok = tokens.next().ok_or_else(|| end_error(text, "missing region count"))?;
    let count: usize = count_tok.parse("region count")?;
    let mut labels = Vec::new();
    for tok in tokens {
        let l: usize = tok.parse("region label")?;
        if l >= count {
            return Err(tok.error(format!("label {l} out of range (count is {count})")));
        }
        labels.push(l);
    }
    if let Some(n) = state_count {
        if labels.len() != n {
            return Err(end_error(
                text,
                format!("{} labels given for {n} states", labels.len()),
            ));
        }
    }
    Decomposition::new(labels, count)
}

pub fn format_decomposition(d: &Decomposition) -> String {
    let mut out = format!("regions {}\n", d.region_count());
    for chunk in d.labels().chunks(20) {
        let line: Vec<String> = chunk.iter().map(ToString::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// `state value` per line.
pub fn format_values(states: &[usize], v: &ValueFunction) -> String {
    let mut out = String::new();
    for (s, x) in states.iter().zip(v.iter()) {
        writeln!(out, "{s} {x}").unwrap();
    }
    out
}

/// `state action-id action-name` per line.
pub fn format_policy(mdp: &Mdp, states: &[usize], p: &Policy) -> String {
    let mut out = String::new();
    for (s, &a) in states.iter().zip(p.iter()) {
        writeln!(out, "{s} {a} {}", mdp.action_name(a)).unwrap();
    }
    out
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes through a temporary file in the same directory and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, contents).map_err(|e| Error::Io(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::Io(format!("{}: {e}", path.display()))
    })
}
