//! Plain-text game documents.
//!
//! ```text
//! # matching pennies
//! finite-game players=2
//! player 1 strategies=2
//! player 2 strategies=2
//! payoff 1 1 1 = 1
//! payoff 1 1 2 = -1
//! ...
//! ```
//!
//! ```text
//! congestion-game players=2
//! resource top alpha=1 beta=0.5
//! resource bottom alpha=0 beta=2
//! player 1 load=1
//! path 1 upper = top
//! path 1 lower = bottom
//! ...
//! ```
//!
//! Players and strategies are numbered from 1. `#` starts a comment.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use gameda::games::{CongestionGame, CongestionPlayer, FiniteGame, Game, Resource};

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone)]
pub enum GameDocument {
    Finite(FiniteGame<f64>),
    Congestion(CongestionGame<f64>),
}

impl GameDocument {
    pub fn into_game(self) -> Box<dyn Game<f64>> {
        match self {
            GameDocument::Finite(g) => Box::new(g),
            GameDocument::Congestion(g) => Box::new(g),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            GameDocument::Finite(g) => format!("finite game, strategies {:?}", g.strategies()),
            GameDocument::Congestion(g) => format!(
                "congestion game, {} players, {} resources",
                g.players(),
                g.resources().len()
            ),
        }
    }
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, message: message.into() })
}

/// `key=value` with the expected key.
fn keyed<'a>(line: usize, token: Option<&'a str>, key: &str) -> Result<&'a str, ParseError> {
    match token.and_then(|t| t.split_once('=')) {
        Some((k, v)) if k == key && !v.is_empty() => Ok(v),
        _ => err(line, format!("expected `{key}=<value>`")),
    }
}

fn number(line: usize, text: &str, field: &str) -> Result<f64, ParseError> {
    match text.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => err(line, format!("{field}: `{}` is not a finite number", text.trim())),
    }
}

/// A 1-based index no larger than `max`.
fn index(line: usize, text: &str, max: usize, field: &str) -> Result<usize, ParseError> {
    match text.parse::<usize>() {
        Ok(v) if (1..=max).contains(&v) => Ok(v - 1),
        _ => err(line, format!("{field} `{text}` must be an integer in 1..={max}")),
    }
}

pub fn parse_game_document(path: &Path) -> Result<GameDocument, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_document_text(&text).map_err(|e| format!("{}:{}: {}", path.display(), e.line, e.message))
}

pub fn parse_document_text(text: &str) -> Result<GameDocument, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let Some((first, header)) = lines.next() else {
        return err(1, "empty document");
    };
    let mut tokens = header.split_whitespace();
    let kind = tokens.next().unwrap_or("");
    let players_text = keyed(first, tokens.next(), "players")?;
    let players = match players_text.parse::<usize>() {
        Ok(n) if n >= 1 => n,
        _ => return err(first, "players must be a positive integer"),
    };
    if tokens.next().is_some() {
        return err(first, "unexpected tokens after the header");
    }
    let body: Vec<(usize, &str)> = lines.collect();
    let last = body.last().map_or(first, |(l, _)| *l);
    match kind {
        "finite-game" => parse_finite(players, &body, last),
        "congestion-game" => parse_congestion(players, &body, last),
        other => err(first, format!("unknown document kind `{other}` (expected finite-game or congestion-game)")),
    }
}

fn parse_finite(players: usize, body: &[(usize, &str)], last: usize) -> Result<GameDocument, ParseError> {
    let mut strategies: Vec<Option<usize>> = vec![None; players];
    let mut cells: Vec<HashMap<Vec<usize>, f64>> = vec![HashMap::new(); players];
    for &(line, text) in body {
        let (lhs, rhs) = match text.split_once('=') {
            Some((l, r)) if text.starts_with("payoff") => (l, Some(r)),
            _ => (text, None),
        };
        let mut tokens = lhs.split_whitespace();
        match tokens.next() {
            Some("player") => {
                let i = index(line, tokens.next().unwrap_or(""), players, "player")?;
                let k = keyed(line, tokens.next(), "strategies")?;
                let k = match k.parse::<usize>() {
                    Ok(k) if k >= 1 => k,
                    _ => return err(line, "strategies must be a positive integer"),
                };
                if strategies[i].replace(k).is_some() {
                    return err(line, format!("player {} declared twice", i + 1));
                }
                if tokens.next().is_some() {
                    return err(line, "unexpected tokens after strategies");
                }
            }
            Some("payoff") => {
                let i = index(line, tokens.next().unwrap_or(""), players, "player")?;
                let profile: Vec<&str> = tokens.collect();
                if profile.len() != players {
                    return err(
                        line,
                        format!("payoff profile has {} entries, expected one per player ({players})", profile.len()),
                    );
                }
                let mut cell = Vec::with_capacity(players);
                for (j, s) in profile.iter().enumerate() {
                    let Some(k) = strategies[j] else {
                        return err(line, format!("payoff before player {} declares its strategies", j + 1));
                    };
                    cell.push(index(line, s, k, &format!("strategy of player {}", j + 1))?);
                }
                let value = number(line, rhs.unwrap_or(""), "payoff")?;
                if cells[i].insert(cell, value).is_some() {
                    return err(line, "payoff cell given twice");
                }
            }
            Some(other) => return err(line, format!("unexpected `{other}` in a finite-game document")),
            None => {}
        }
    }
    let mut ks = Vec::with_capacity(players);
    for (i, k) in strategies.iter().enumerate() {
        match k {
            Some(k) => ks.push(*k),
            None => return err(last, format!("player {} never declares its strategies", i + 1)),
        }
    }
    let probe = FiniteGame::from_fn(ks.clone(), |_, _| 0.0).map_err(|e| ParseError { line: last, message: e.to_string() })?;
    for (i, table) in cells.iter().enumerate() {
        for p in probe.profiles() {
            if !table.contains_key(&p) {
                let shown: Vec<String> = p.iter().map(|a| (a + 1).to_string()).collect();
                return err(last, format!("missing payoff {} {}", i + 1, shown.join(" ")));
            }
        }
    }
    FiniteGame::from_fn(ks, |i, p| cells[i][p])
        .map(GameDocument::Finite)
        .map_err(|e| ParseError { line: last, message: e.to_string() })
}

fn parse_congestion(players: usize, body: &[(usize, &str)], last: usize) -> Result<GameDocument, ParseError> {
    let mut resources: Vec<Resource<f64>> = Vec::new();
    let mut loads: Vec<Option<f64>> = vec![None; players];
    let mut paths: Vec<Vec<(String, Vec<usize>)>> = vec![Vec::new(); players];
    for &(line, text) in body {
        let (lhs, rhs) = match text.split_once('=') {
            Some((l, r)) if text.starts_with("path") => (l, Some(r)),
            _ => (text, None),
        };
        let mut tokens = lhs.split_whitespace();
        match tokens.next() {
            Some("resource") => {
                let Some(name) = tokens.next() else {
                    return err(line, "resource needs a name");
                };
                if resources.iter().any(|r| r.name == name) {
                    return err(line, format!("resource {name} declared twice"));
                }
                let alpha = number(line, keyed(line, tokens.next(), "alpha")?, "alpha")?;
                let beta = number(line, keyed(line, tokens.next(), "beta")?, "beta")?;
                if alpha < 0.0 || beta < 0.0 {
                    return err(line, "alpha and beta must be nonnegative");
                }
                resources.push(Resource { name: name.to_string(), alpha, beta });
            }
            Some("player") => {
                let i = index(line, tokens.next().unwrap_or(""), players, "player")?;
                let load = number(line, keyed(line, tokens.next(), "load")?, "load")?;
                if !(load > 0.0) {
                    return err(line, "load must be positive");
                }
                if loads[i].replace(load).is_some() {
                    return err(line, format!("player {} declared twice", i + 1));
                }
            }
            Some("path") => {
                let i = index(line, tokens.next().unwrap_or(""), players, "player")?;
                let Some(name) = tokens.next() else {
                    return err(line, "path needs a name");
                };
                if tokens.next().is_some() {
                    return err(line, "expected `path <player> <name> = <resources>`");
                }
                if paths[i].iter().any(|(n, _)| n == name) {
                    return err(line, format!("path {name} declared twice for player {}", i + 1));
                }
                let mut members = Vec::new();
                for r in rhs.unwrap_or("").split(',').map(str::trim) {
                    match resources.iter().position(|res| res.name == r) {
                        Some(k) if !members.contains(&k) => members.push(k),
                        Some(_) => return err(line, format!("path {name} lists resource {r} twice")),
                        None if r.is_empty() => return err(line, format!("path {name} lists no resources")),
                        None => return err(line, format!("path {name} references undeclared resource {r}")),
                    }
                }
                paths[i].push((name.to_string(), members));
            }
            Some(other) => return err(line, format!("unexpected `{other}` in a congestion-game document")),
            None => {}
        }
    }
    let mut declared = Vec::with_capacity(players);
    for i in 0..players {
        let Some(load) = loads[i] else {
            return err(last, format!("player {} has no load", i + 1));
        };
        if paths[i].is_empty() {
            return err(last, format!("player {} has no paths", i + 1));
        }
        let (names, members): (Vec<String>, Vec<Vec<usize>>) = paths[i].iter().cloned().unzip();
        declared.push(CongestionPlayer { load, path_names: names, paths: members });
    }
    CongestionGame::new(resources, declared)
        .map(GameDocument::Congestion)
        .map_err(|e| ParseError { line: last, message: e.to_string() })
}
