//! Text format for influence diagrams.
//!
//! ```text
//! name: weather
//! format_version: 1
//!
//! chance Weather
//!   domain: sunny rainy
//!   parents:
//!   table:
//!     (): 0.7 0.3
//!
//! decision Umbrella
//!   domain: take leave
//!   parents: Weather
//!
//! value Utility
//!   parents: Weather Umbrella
//!   table:
//!     (sunny take): 20
//!     ...
//! ```
//!
//! Indentation is not significant and `#` starts a comment. Table rows are keyed by the
//! parent outcome tuple; rows may appear in any order but every row must be present for
//! the diagram to validate.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{InfluenceDiagram, Node, NodeKind, Variable};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Chance,
    Decision,
    Value,
}

struct RawRow {
    line: usize,
    labels: Vec<String>,
    values: Vec<f64>,
}

struct RawBlock {
    line: usize,
    kind: Kind,
    name: String,
    domain: Option<Vec<String>>,
    parents: Option<(usize, Vec<String>)>,
    table: Option<Vec<RawRow>>,
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn column_of(line: &str, needle: &str) -> usize {
    line.find(needle).map_or(1, |i| i + 1)
}

pub fn parse_diagram(text: &str) -> Result<InfluenceDiagram> {
    let mut name: Option<String> = None;
    let mut version: Option<u32> = None;
    let mut metadata = BTreeMap::new();
    let mut blocks: Vec<RawBlock> = Vec::new();
    let mut in_table = false;

    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(raw_line).trim();
        if line.is_empty() {
            continue;
        }

        let first = line.split_whitespace().next().unwrap_or_default();
        let kind = match first {
            "chance" => Some(Kind::Chance),
            "decision" => Some(Kind::Decision),
            "value" => Some(Kind::Value),
            _ => None,
        };
        if let Some(kind) = kind {
            if !line[first.len()..].starts_with(':') {
                let tokens: Vec<&str> = line.split_whitespace().collect();
                if tokens.len() != 2 {
                    return Err(Error::parse(lineno, 1, format!("expected `{first} <name>`")));
                }
                check_ident(tokens[1], lineno, column_of(raw_line, tokens[1]))?;
                blocks.push(RawBlock {
                    line: lineno,
                    kind,
                    name: tokens[1].to_owned(),
                    domain: None,
                    parents: None,
                    table: None,
                });
                in_table = false;
                continue;
            }
        }

        if line.starts_with('(') {
            let block = match blocks.last_mut() {
                Some(b) if in_table => b,
                _ => {
                    return Err(Error::parse(
                        lineno,
                        column_of(raw_line, "("),
                        "table row outside a table",
                    ))
                }
            };
            let row = parse_row(line, raw_line, lineno)?;
            block.table.get_or_insert_with(Vec::new).push(row);
            continue;
        }

        let (key, value) = match line.split_once(':') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => {
                return Err(Error::parse(
                    lineno,
                    1,
                    format!("expected `key: value`, found `{line}`"),
                ))
            }
        };

        let Some(block) = blocks.last_mut() else {
            match key {
                "name" => {
                    check_ident(value, lineno, column_of(raw_line, value))?;
                    name = Some(value.to_owned());
                }
                "format_version" => {
                    let v: u32 = value.parse().map_err(|_| {
                        Error::parse(lineno, column_of(raw_line, value), "format_version must be an integer")
                    })?;
                    if v != FORMAT_VERSION {
                        return Err(Error::parse(
                            lineno,
                            column_of(raw_line, value),
                            format!("unsupported format_version {v}"),
                        ));
                    }
                    version = Some(v);
                }
                k if k.starts_with("meta.") && k.len() > 5 => {
                    metadata.insert(k[5..].to_owned(), value.to_owned());
                }
                _ => return Err(Error::parse(lineno, 1, format!("unknown header key `{key}`"))),
            }
            continue;
        };

        in_table = false;
        match key {
            "domain" => {
                if block.kind == Kind::Value {
                    return Err(Error::parse(lineno, 1, "value nodes have no domain"));
                }
                if block.domain.is_some() {
                    return Err(Error::parse(lineno, 1, "domain given twice"));
                }
                let labels: Vec<String> = value.split_whitespace().map(str::to_owned).collect();
                for l in &labels {
                    check_ident(l, lineno, column_of(raw_line, l))?;
                }
                block.domain = Some(labels);
            }
            "parents" => {
                if block.parents.is_some() {
                    return Err(Error::parse(lineno, 1, "parents given twice"));
                }
                block.parents = Some((lineno, value.split_whitespace().map(str::to_owned).collect()));
            }
            "table" => {
                if block.kind == Kind::Decision {
                    return Err(Error::parse(lineno, 1, "decision nodes have no table"));
                }
                if !value.is_empty() {
                    return Err(Error::parse(
                        lineno,
                        column_of(raw_line, value),
                        "rows go on the lines after `table:`",
                    ));
                }
                if block.table.is_some() {
                    return Err(Error::parse(lineno, 1, "table given twice"));
                }
                block.table = Some(Vec::new());
                in_table = true;
            }
            _ => return Err(Error::parse(lineno, 1, format!("unknown key `{key}`"))),
        }
    }

    let name = name.ok_or_else(|| Error::parse(1, 1, "missing `name:` header"))?;
    if version.is_none() {
        return Err(Error::parse(1, 1, "missing `format_version:` header"));
    }
    resolve(name, metadata, blocks)
}

fn check_ident(s: &str, line: usize, column: usize) -> Result<()> {
    if s.is_empty()
        || s.chars()
            .any(|c| c.is_whitespace() || matches!(c, '(' | ')' | ':' | '#' | '='))
    {
        return Err(Error::parse(line, column, format!("invalid identifier `{s}`")));
    }
    Ok(())
}

fn parse_row(line: &str, raw_line: &str, lineno: usize) -> Result<RawRow> {
    let close = line
        .find(')')
        .ok_or_else(|| Error::parse(lineno, column_of(raw_line, "("), "unterminated row key"))?;
    let labels = line[1..close].split_whitespace().map(str::to_owned).collect();
    let rest = line[close + 1..].trim_start();
    let rest = rest
        .strip_prefix(':')
        .ok_or_else(|| Error::parse(lineno, column_of(raw_line, ")") + 1, "expected `:` after row key"))?;
    let mut values = Vec::new();
    for tok in rest.split_whitespace() {
        let v: f64 = tok
            .parse()
            .map_err(|_| Error::parse(lineno, column_of(raw_line, tok), format!("`{tok}` is not a number")))?;
        values.push(v);
    }
    Ok(RawRow {
        line: lineno,
        labels,
        values,
    })
}

fn resolve(name: String, metadata: BTreeMap<String, String>, blocks: Vec<RawBlock>) -> Result<InfluenceDiagram> {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    for (i, b) in blocks.iter().enumerate() {
        if ids.insert(b.name.as_str(), i).is_some() {
            return Err(Error::parse(b.line, 1, format!("duplicate node name `{}`", b.name)));
        }
        if b.kind != Kind::Value && b.domain.is_none() {
            return Err(Error::parse(b.line, 1, format!("`{}` has no domain", b.name)));
        }
        if b.kind != Kind::Decision && b.table.is_none() {
            return Err(Error::parse(b.line, 1, format!("`{}` has no table", b.name)));
        }
    }
    let domains: Vec<&[String]> = blocks.iter().map(|b| b.domain.as_deref().unwrap_or(&[])).collect();

    let mut nodes = Vec::with_capacity(blocks.len());
    for b in &blocks {
        let mut parents = Vec::new();
        if let Some((line, names)) = &b.parents {
            for p in names {
                let id = *ids
                    .get(p.as_str())
                    .ok_or_else(|| Error::parse(*line, 1, format!("unknown parent `{p}` of `{}`", b.name)))?;
                parents.push(id);
            }
        }
        let width = match b.kind {
            Kind::Chance => domains[ids[b.name.as_str()]].len(),
            _ => 1,
        };
        let kind = match b.kind {
            Kind::Decision => NodeKind::Decision,
            Kind::Chance | Kind::Value => {
                let rows: usize = parents.iter().map(|&p| domains[p].len()).product();
                let mut table = vec![f64::NAN; rows * width];
                let mut filled = vec![false; rows];
                for row in b.table.as_deref().unwrap_or(&[]) {
                    if row.labels.len() != parents.len() {
                        return Err(Error::parse(
                            row.line,
                            1,
                            format!(
                                "row key has {} labels, `{}` has {} parents",
                                row.labels.len(),
                                b.name,
                                parents.len()
                            ),
                        ));
                    }
                    let mut index = 0;
                    for (label, &p) in row.labels.iter().zip(&parents) {
                        let x = domains[p].iter().position(|l| l == label).ok_or_else(|| {
                            Error::parse(
                                row.line,
                                1,
                                format!("`{label}` is not an outcome of `{}`", blocks[p].name),
                            )
                        })?;
                        index = index * domains[p].len() + x;
                    }
                    if filled[index] {
                        return Err(Error::parse(
                            row.line,
                            1,
                            format!("duplicate row ({})", row.labels.join(" ")),
                        ));
                    }
                    if row.values.len() != width {
                        return Err(Error::parse(
                            row.line,
                            1,
                            format!("row has {} values, expected {width}", row.values.len()),
                        ));
                    }
                    filled[index] = true;
                    table[index * width..(index + 1) * width].copy_from_slice(&row.values);
                }
                match b.kind {
                    Kind::Chance => NodeKind::Chance { cpt: table },
                    _ => NodeKind::Value { values: table },
                }
            }
        };
        nodes.push(Node {
            var: Variable::new(b.name.clone(), b.domain.clone().unwrap_or_default()),
            parents,
            kind,
        });
    }
    Ok(InfluenceDiagram::new(name, nodes).with_metadata(metadata))
}

pub fn serialize_diagram(d: &InfluenceDiagram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "name: {}", d.name());
    let _ = writeln!(out, "format_version: {FORMAT_VERSION}");
    for (k, v) in d.metadata() {
        let _ = writeln!(out, "meta.{k}: {v}");
    }
    for (id, node) in d.nodes().iter().enumerate() {
        out.push('\n');
        let keyword = match node.kind {
            NodeKind::Chance { .. } => "chance",
            NodeKind::Decision => "decision",
            NodeKind::Value { .. } => "value",
        };
        let _ = writeln!(out, "{keyword} {}", node.name());
        if !node.is_value() {
            let _ = writeln!(out, "  domain: {}", node.var.domain.join(" "));
        }
        let parents: Vec<&str> = node.parents.iter().map(|&p| d.node(p).name()).collect();
        let _ = writeln!(out, "  parents: {}", parents.join(" "));
        let (table, width) = match &node.kind {
            NodeKind::Chance { cpt } => (cpt, node.var.card()),
            NodeKind::Value { values } => (values, 1),
            NodeKind::Decision => continue,
        };
        out.push_str("  table:\n");
        for row in 0..d.row_count(id) {
            let values: Vec<String> = table[row * width..(row + 1) * width]
                .iter()
                .map(|v| format!("{v}"))
                .collect();
            let _ = writeln!(out, "    ({}): {}", d.row_labels(id, row).join(" "), values.join(" "));
        }
    }
    // Trailing whitespace from an empty parent list is harmless but untidy.
    out.lines().map(str::trim_end).collect::<Vec<_>>().join("\n") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::ViolationKind;

    const WEATHER: &str = include_str!("../fixtures/weather.id");

    #[test]
    fn weather_fixture_parses_and_validates() {
        let d = parse_diagram(WEATHER).unwrap();
        assert_eq!(d.decisions().len(), 2);
        assert_eq!(d.nodes().iter().filter(|n| n.is_value()).count(), 1);
        let r = d.validate();
        assert!(r.is_ok(), "{r}");
        assert!(r.warnings.is_empty(), "{r}");
    }

    #[test]
    fn serialize_then_parse_is_identity() {
        let d = parse_diagram(WEATHER).unwrap();
        let text = serialize_diagram(&d);
        let back = parse_diagram(&text).unwrap();
        assert_eq!(d, back);
        assert_eq!(serialize_diagram(&back), text);
    }

    #[test]
    fn duplicate_node_name_is_reported() {
        let text = "name: x\nformat_version: 1\nchance A\ndomain: a b\nparents:\ntable:\n(): 0.5 0.5\nchance A\ndomain: a b\nparents:\ntable:\n(): 0.5 0.5\n";
        let err = parse_diagram(text).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 8);
                assert!(message.contains("duplicate node name `A`"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn syntax_error_carries_position() {
        let text = "name: x\nformat_version: 1\nchance A\ndomain: a b\nparents:\ntable:\n(): 0.5 zero\n";
        match parse_diagram(text).unwrap_err() {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 7);
                assert_eq!(column, 9);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_row_is_left_to_validation() {
        let text = "name: x\nformat_version: 1\nchance A\ndomain: a b\nparents:\ntable:\n(): 0.5 0.5\nchance B\ndomain: a b\nparents: A\ntable:\n(a): 1 0\nvalue V\nparents: B\ntable:\n(a): 1\n(b): 0\n";
        let d = parse_diagram(text).unwrap();
        assert!(d.validate().has(ViolationKind::MalformedTable));
    }

    #[test]
    fn comments_and_whitespace_are_ignored() {
        let text = "# leading comment\n  name:   x  \nformat_version: 1   # trailing\n\n   chance   A\n domain:  a   b\n parents:\n table:\n    ():  0.25   0.75\nvalue V\nparents: A\ntable:\n(b): 2\n(a): 1\n";
        let d = parse_diagram(text).unwrap();
        assert!(d.validate().is_ok());
        match &d.node(1).kind {
            NodeKind::Value { values } => assert_eq!(values, &vec![1.0, 2.0]),
            _ => unreachable!(),
        }
    }
}
