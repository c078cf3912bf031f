//! JSON rendering. Every float is written with 17 significant digits so that
//! it parses back to the same double.

use peerfx_core::{AttrMultiset, TreatmentSpace};
use serde_json::{json, Map, Number, Value};

/// A float as a JSON number, or the strings `"inf"`/`"-inf"`/`"nan"` when it
/// has no JSON representation.
pub fn num(x: f64) -> Value {
    if x.is_nan() {
        return Value::String("nan".into());
    }
    if x.is_infinite() {
        return Value::String(if x > 0.0 { "inf" } else { "-inf" }.into());
    }
    let x = if x == 0.0 { 0.0 } else { x };
    Value::Number(format!("{x:.16e}").parse::<Number>().expect("formatted float is valid JSON"))
}

pub fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn matrix(rows: &[Vec<f64>]) -> Value {
    Value::Array(rows.iter().map(|r| nums(r)).collect())
}

/// `"1,1,2"` for the multiset `{1, 1, 2}`, using 1-based attribute numbers.
pub fn multiset(m: &AttrMultiset) -> String {
    m.labels().map(|a| (a + 1).to_string()).collect::<Vec<_>>().join(",")
}

/// Canonical orders of peer sets and group sets.
pub fn space(space: &TreatmentSpace) -> Value {
    json!({
        "H": space.num_attrs(),
        "K": space.k(),
        "peer_sets": space.peer_sets().iter().map(multiset).collect::<Vec<_>>(),
        "group_sets": space.group_sets().iter().map(multiset).collect::<Vec<_>>(),
    })
}

/// Attribute numbering: label `labels[a]` is attribute `a + 1`.
pub fn labels(labels: &[String]) -> Value {
    Value::Array(labels.iter().enumerate().map(|(a, l)| json!({ "attribute": a + 1, "label": l })).collect())
}

/// The document written for every command.
pub fn envelope(command: &str, config: Value, labels: Value, space: Value, result: Value) -> Value {
    let mut doc = Map::new();
    doc.insert("command".into(), Value::String(command.into()));
    doc.insert("version".into(), Value::String(concat!("peerfx ", env!("CARGO_PKG_VERSION")).into()));
    doc.insert("config".into(), config);
    doc.insert("attribute_labels".into(), labels);
    doc.insert("space".into(), space);
    doc.insert("result".into(), result);
    Value::Object(doc)
}

pub fn render(doc: &Value) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("JSON values always serialize");
    s.push('\n');
    s
}
