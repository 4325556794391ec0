//! Text formats for MDPs and aggregation schemes.
//!
//! Both are TOML documents. An MDP file lists sparse kernel entries as
//! `[h, s, a, s', p]` and rewards as `[h, s, a, r]`; anything unlisted is 0.
//! Probabilities and rewards may be written as numbers or as exact
//! fractions such as `"1/3"`.
//!
//! ```toml
//! S = 2
//! A = 1
//! H = 1
//! initial_state = 0
//! transitions = [[0, 0, 0, 1, 1.0], [0, 1, 0, 0, "1/2"], [0, 1, 0, 1, "1/2"]]
//! rewards = [[0, 1, 0, 1.0]]
//! ```
//!
//! A scheme file gives the partition as one subMDP index per state, the
//! aggregate of each subMDP, per-aggregate sizes and the `[i, s, s̄]` image
//! triples:
//!
//! ```toml
//! L = 2
//! N = 1
//! partition = [0, 1]
//! submdp_to_aggregate = [0, 0]
//! aggregate_internal = [1]
//! aggregate_exits = [1]
//! maps = [[0, 0, 0], [0, 1, 1], [1, 1, 0], [1, 0, 1]]
//! ```
//!
//! All indices are zero-based.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;

use serde::Deserialize;
use toml::Spanned;

use crate::aggregation::{AggregateShape, AggregationScheme, Partition};
use crate::error::{Error, Result};
use crate::mdp::EpisodicMdp;

/// A number or an exact fraction string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Number {
    Value(f64),
    Text(String),
}

impl Number {
    fn value(&self) -> std::result::Result<f64, String> {
        match self {
            Number::Value(v) => Ok(*v),
            Number::Text(t) => parse_fraction(t),
        }
    }
}

/// Parses `"p/q"` or a plain decimal string.
pub fn parse_fraction(text: &str) -> std::result::Result<f64, String> {
    let text = text.trim();
    let parse = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("`{text}` is not a number or fraction"))
    };
    match text.split_once('/') {
        Some((num, den)) => {
            let (num, den) = (parse(num)?, parse(den)?);
            if den == 0.0 {
                return Err(format!("`{text}` has a zero denominator"));
            }
            Ok(num / den)
        }
        None => parse(text),
    }
}

/// `(h, s, a, s', p)`
type TransitionEntry = (usize, usize, usize, usize, Number);
/// `(h, s, a, r)`
type RewardEntry = (usize, usize, usize, Number);

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpDocument {
    #[serde(rename = "S")]
    states: usize,
    #[serde(rename = "A")]
    actions: usize,
    #[serde(rename = "H")]
    horizon: usize,
    #[serde(default)]
    initial_state: usize,
    #[serde(default)]
    transitions: Vec<Spanned<TransitionEntry>>,
    #[serde(default)]
    rewards: Vec<Spanned<RewardEntry>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemeDocument {
    #[serde(rename = "L")]
    subs: Spanned<usize>,
    #[serde(rename = "N")]
    aggregates: Spanned<usize>,
    partition: Spanned<Vec<usize>>,
    submdp_to_aggregate: Spanned<Vec<usize>>,
    aggregate_internal: Spanned<Vec<usize>>,
    aggregate_exits: Spanned<Vec<usize>>,
    maps: Vec<Spanned<(usize, usize, usize)>>,
}

/// One-based line of a byte offset.
pub fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn at(text: &str, span: Range<usize>, message: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {}: {message}", line_of(text, span.start)))
}

/// Converts a TOML deserialisation error into a line-anchored parse error.
pub(crate) fn toml_error(text: &str, err: toml::de::Error) -> Error {
    match err.span() {
        Some(span) => at(text, span, err.message()),
        None => Error::Parse(err.message().to_string()),
    }
}

/// Parses an MDP document. Shapes and indices are checked; stochasticity
/// is left to [`EpisodicMdp::validate`].
pub fn parse_mdp(text: &str) -> Result<EpisodicMdp> {
    let doc: MdpDocument = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    let (s_count, a_count, horizon) = (doc.states, doc.actions, doc.horizon);
    if s_count == 0 || a_count == 0 || horizon == 0 {
        return Err(Error::Parse("S, A and H must be positive".into()));
    }
    let mut transitions = vec![vec![0.0; s_count * a_count * s_count]; horizon];
    let mut seen = BTreeMap::new();
    for entry in &doc.transitions {
        let (h, s, a, next, ref p) = *entry.get_ref();
        if h >= horizon || s >= s_count || a >= a_count || next >= s_count {
            return Err(at(
                text,
                entry.span(),
                format!("entry [{h}, {s}, {a}, {next}] is out of range"),
            ));
        }
        if seen.insert((h, s, a, next), ()).is_some() {
            return Err(at(
                text,
                entry.span(),
                format!("duplicate entry [{h}, {s}, {a}, {next}]"),
            ));
        }
        let p = p.value().map_err(|m| at(text, entry.span(), m))?;
        transitions[h][(s * a_count + a) * s_count + next] = p;
    }
    let mut rewards = vec![vec![0.0; s_count * a_count]; horizon];
    let mut seen = BTreeMap::new();
    for entry in &doc.rewards {
        let (h, s, a, ref r) = *entry.get_ref();
        if h >= horizon || s >= s_count || a >= a_count {
            return Err(at(
                text,
                entry.span(),
                format!("reward [{h}, {s}, {a}] is out of range"),
            ));
        }
        if seen.insert((h, s, a), ()).is_some() {
            return Err(at(text, entry.span(), format!("duplicate reward [{h}, {s}, {a}]")));
        }
        rewards[h][s * a_count + a] = r.value().map_err(|m| at(text, entry.span(), m))?;
    }
    EpisodicMdp::new(s_count, a_count, horizon, doc.initial_state, transitions, rewards)
        .map_err(|e| Error::Parse(e.to_string()))
}

/// Parses a scheme document against the MDP it aggregates.
pub fn parse_scheme(text: &str, mdp: &EpisodicMdp) -> Result<AggregationScheme> {
    let doc: SchemeDocument = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    let subs = *doc.subs.get_ref();
    let aggregates = *doc.aggregates.get_ref();
    if doc.partition.get_ref().len() != mdp.states() {
        return Err(at(
            text,
            doc.partition.span(),
            format!(
                "partition has {} entries for S={}",
                doc.partition.get_ref().len(),
                mdp.states()
            ),
        ));
    }
    let partition = Partition::new(doc.partition.get_ref().clone()).map_err(|e| at(text, doc.partition.span(), e))?;
    if partition.cells() != subs {
        return Err(at(
            text,
            doc.subs.span(),
            format!("L={subs} but the partition has {} cells", partition.cells()),
        ));
    }
    for (field, list) in [
        ("aggregate_internal", &doc.aggregate_internal),
        ("aggregate_exits", &doc.aggregate_exits),
    ] {
        if list.get_ref().len() != aggregates {
            return Err(at(
                text,
                list.span(),
                format!("{field} has {} entries for N={aggregates}", list.get_ref().len()),
            ));
        }
    }
    let shapes = doc
        .aggregate_internal
        .get_ref()
        .iter()
        .zip(doc.aggregate_exits.get_ref())
        .map(|(&internal, &exits)| AggregateShape { internal, exits })
        .collect();
    let triples: Vec<_> = doc.maps.iter().map(|m| *m.get_ref()).collect();
    AggregationScheme::new(
        mdp,
        partition,
        shapes,
        doc.submdp_to_aggregate.get_ref().clone(),
        &triples,
    )
}

pub fn read_mdp(path: &std::path::Path) -> Result<EpisodicMdp> {
    parse_mdp(&std::fs::read_to_string(path)?)
}

pub fn read_scheme(path: &std::path::Path, mdp: &EpisodicMdp) -> Result<AggregationScheme> {
    parse_scheme(&std::fs::read_to_string(path)?, mdp)
}

/// Writes the nonzero kernel entries and rewards of `mdp`.
pub fn format_mdp(mdp: &EpisodicMdp) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "S = {}", mdp.states());
    let _ = writeln!(out, "A = {}", mdp.actions());
    let _ = writeln!(out, "H = {}", mdp.horizon());
    let _ = writeln!(out, "initial_state = {}", mdp.initial_state());
    out.push_str("transitions = [\n");
    for h in 0..mdp.horizon() {
        for s in 0..mdp.states() {
            for a in 0..mdp.actions() {
                for (next, &p) in mdp.transition_row(h, s, a).iter().enumerate() {
                    if p != 0.0 {
                        let _ = writeln!(out, "  [{h}, {s}, {a}, {next}, {}],", float(p));
                    }
                }
            }
        }
    }
    out.push_str("]\nrewards = [\n");
    for h in 0..mdp.horizon() {
        for s in 0..mdp.states() {
            for a in 0..mdp.actions() {
                let r = mdp.reward(h, s, a);
                if r != 0.0 {
                    let _ = writeln!(out, "  [{h}, {s}, {a}, {}],", float(r));
                }
            }
        }
    }
    out.push_str("]\n");
    out
}

/// Writes a scheme in the format read by [`parse_scheme`].
pub fn format_scheme(scheme: &AggregationScheme) -> String {
    let list = |xs: &mut dyn Iterator<Item = usize>| xs.map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
    let mut out = String::new();
    let _ = writeln!(out, "L = {}", scheme.submdps());
    let _ = writeln!(out, "N = {}", scheme.aggregates());
    let _ = writeln!(
        out,
        "partition = [{}]",
        list(&mut scheme.partition().assignment().iter().copied())
    );
    let _ = writeln!(
        out,
        "submdp_to_aggregate = [{}]",
        list(&mut (0..scheme.submdps()).map(|i| scheme.aggregate_of(i)))
    );
    let _ = writeln!(
        out,
        "aggregate_internal = [{}]",
        list(&mut scheme.shapes().iter().map(|s| s.internal))
    );
    let _ = writeln!(
        out,
        "aggregate_exits = [{}]",
        list(&mut scheme.shapes().iter().map(|s| s.exits))
    );
    out.push_str("maps = [\n");
    for (i, s, image) in scheme.image_triples() {
        let _ = writeln!(out, "  [{i}, {s}, {image}],");
    }
    out.push_str("]\n");
    out
}

/// Shortest representation that parses back to the same `f64`, always
/// with a decimal point so TOML reads it as a float.
pub fn float(x: f64) -> String {
    let s = format!("{x:?}");
    if s.contains(['.', 'e', 'E']) || !x.is_finite() {
        s
    } else {
        format!("{s}.0")
    }
}
