//! Rewriting of venue categories into abstract place labels.
//!
//! A taxonomy file holds one rule per line:
//!
//! ```text
//! # comment
//! substring "thai" -> "Thai restaurant"
//! prefix "coffee" -> "Cafe"
//! exact "Gym / Fitness Center" -> "Gym"
//! default "Other"
//! ```
//!
//! Rules are tried top to bottom and the first match wins. Matching is
//! case-insensitive. The optional `default` line must come last; it is either
//! `default passthrough` (keep the category name, the implicit policy) or
//! `default "<label>"`.

use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::ingest::UserHistory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchKind {
    Exact,
    Prefix,
    Substring,
}

impl MatchKind {
    fn keyword(self) -> &'static str {
        match self {
            MatchKind::Exact => "exact",
            MatchKind::Prefix => "prefix",
            MatchKind::Substring => "substring",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    kind: MatchKind,
    pattern: String,
    folded: String,
    label: String,
}

impl Rule {
    pub fn new(
        kind: MatchKind,
        pattern: impl Into<String>,
        label: impl Into<String>,
    ) -> Result<Self, TaxonomyError> {
        let pattern = pattern.into();
        let label = label.into();
        if label.is_empty() {
            return Err(TaxonomyError::EmptyLabel { line: 0 });
        }
        Ok(Rule {
            kind,
            folded: pattern.to_lowercase(),
            pattern,
            label,
        })
    }

    pub fn kind(&self) -> MatchKind {
        self.kind
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `folded_category` must already be lowercased.
    fn matches(&self, folded_category: &str) -> bool {
        match self.kind {
            MatchKind::Exact => folded_category == self.folded,
            MatchKind::Prefix => folded_category.starts_with(&self.folded),
            MatchKind::Substring => folded_category.contains(&self.folded),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum DefaultPolicy {
    #[default]
    Passthrough,
    FixedLabel(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTaxonomy {
    name: String,
    rules: Vec<Rule>,
    default_policy: DefaultPolicy,
}

impl Default for LabelTaxonomy {
    fn default() -> Self {
        LabelTaxonomy::identity()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TaxonomyError {
    #[error("taxonomy line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("taxonomy line {line}: label must not be empty")]
    EmptyLabel { line: usize },
    #[error("cannot read taxonomy: {0}")]
    Io(#[from] std::io::Error),
}

impl LabelTaxonomy {
    /// No rules, passthrough default: every category is its own label.
    pub fn identity() -> Self {
        LabelTaxonomy {
            name: "identity".to_string(),
            rules: Vec::new(),
            default_policy: DefaultPolicy::Passthrough,
        }
    }

    pub fn new(
        name: impl Into<String>,
        rules: Vec<Rule>,
        default_policy: DefaultPolicy,
    ) -> Result<Self, TaxonomyError> {
        if matches!(&default_policy, DefaultPolicy::FixedLabel(l) if l.is_empty()) {
            return Err(TaxonomyError::EmptyLabel { line: 0 });
        }
        Ok(LabelTaxonomy {
            name: name.into(),
            rules,
            default_policy,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn default_policy(&self) -> &DefaultPolicy {
        &self.default_policy
    }

    /// Parses taxonomy text. Rules keep file order; duplicates are allowed.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, TaxonomyError> {
        let mut rules = Vec::new();
        let mut default_policy = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if default_policy.is_some() {
                return Err(syntax(line_no, "no rules may follow the `default` line"));
            }
            let mut cursor = Cursor::new(line, line_no);
            let keyword = cursor.word()?;
            match keyword {
                "default" => {
                    let policy = if cursor.peek() == Some('"') {
                        let label = cursor.quoted()?;
                        if label.is_empty() {
                            return Err(TaxonomyError::EmptyLabel { line: line_no });
                        }
                        DefaultPolicy::FixedLabel(label)
                    } else {
                        match cursor.word()? {
                            "passthrough" => DefaultPolicy::Passthrough,
                            other => {
                                return Err(syntax(
                                    line_no,
                                    format!("expected `passthrough` or a quoted label, found `{other}`"),
                                ))
                            }
                        }
                    };
                    cursor.end()?;
                    default_policy = Some(policy);
                }
                "exact" | "prefix" | "substring" => {
                    let kind = match keyword {
                        "exact" => MatchKind::Exact,
                        "prefix" => MatchKind::Prefix,
                        _ => MatchKind::Substring,
                    };
                    let pattern = cursor.quoted()?;
                    cursor.arrow()?;
                    let label = cursor.quoted()?;
                    cursor.end()?;
                    if label.is_empty() {
                        return Err(TaxonomyError::EmptyLabel { line: line_no });
                    }
                    rules.push(Rule {
                        kind,
                        folded: pattern.to_lowercase(),
                        pattern,
                        label,
                    });
                }
                other => {
                    return Err(syntax(
                        line_no,
                        format!("expected exact, prefix, substring or default, found `{other}`"),
                    ))
                }
            }
        }
        Ok(LabelTaxonomy {
            name: name.into(),
            rules,
            default_policy: default_policy.unwrap_or_default(),
        })
    }

    /// Writes the taxonomy back in file syntax.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            out.push_str(&format!(
                "{} {} -> {}\n",
                rule.kind.keyword(),
                quote(&rule.pattern),
                quote(&rule.label)
            ));
        }
        match &self.default_policy {
            DefaultPolicy::Passthrough => out.push_str("default passthrough\n"),
            DefaultPolicy::FixedLabel(label) => {
                out.push_str(&format!("default {}\n", quote(label)))
            }
        }
        out
    }

    /// Label for one venue category.
    pub fn label_for<'a>(&'a self, category: &'a str) -> &'a str {
        if !self.rules.is_empty() {
            let folded = category.to_lowercase();
            if let Some(rule) = self.rules.iter().find(|r| r.matches(&folded)) {
                return &rule.label;
            }
        }
        match &self.default_policy {
            DefaultPolicy::Passthrough => category,
            DefaultPolicy::FixedLabel(label) => label,
        }
    }
}

/// Loads a taxonomy file; the taxonomy is named after the file stem.
pub fn load_taxonomy(path: impl AsRef<Path>) -> Result<LabelTaxonomy, TaxonomyError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "taxonomy".to_string());
    LabelTaxonomy::parse(name, &text)
}

/// A check-in after relabeling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabeledVisit {
    pub user_id: String,
    pub label: String,
    pub utc_time: DateTime<Utc>,
    pub tz_offset_minutes: i32,
    pub venue_id: String,
}

/// Relabels every record of a history, preserving length and order.
pub fn relabel(history: &UserHistory, taxonomy: &LabelTaxonomy) -> Vec<LabeledVisit> {
    history
        .records
        .iter()
        .map(|r| LabeledVisit {
            user_id: r.user_id.clone(),
            label: taxonomy.label_for(&r.venue_category_name).to_string(),
            utc_time: r.utc_time,
            tz_offset_minutes: r.tz_offset_minutes,
            venue_id: r.venue_id.clone(),
        })
        .collect()
}

fn syntax(line: usize, message: impl Into<String>) -> TaxonomyError {
    TaxonomyError::Syntax {
        line,
        message: message.into(),
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

struct Cursor<'a> {
    rest: &'a str,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str, line: usize) -> Self {
        Cursor { rest: text, line }
    }

    fn skip_ws(&mut self) {
        self.rest = self.rest.trim_start();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest.chars().next()
    }

    fn word(&mut self) -> Result<&'a str, TaxonomyError> {
        self.skip_ws();
        let end = self
            .rest
            .find(|c: char| !c.is_ascii_alphanumeric() && c != '_')
            .unwrap_or(self.rest.len());
        if end == 0 {
            return Err(syntax(self.line, format!("expected a keyword at `{}`", self.rest)));
        }
        let (word, rest) = self.rest.split_at(end);
        self.rest = rest;
        Ok(word)
    }

    fn quoted(&mut self) -> Result<String, TaxonomyError> {
        self.skip_ws();
        let mut chars = self.rest.char_indices();
        if !matches!(chars.next(), Some((_, '"'))) {
            return Err(syntax(self.line, "expected a double-quoted string"));
        }
        let mut out = String::new();
        let mut escaped = false;
        for (idx, c) in chars {
            if escaped {
                out.push(c);
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                self.rest = &self.rest[idx + 1..];
                return Ok(out);
            } else {
                out.push(c);
            }
        }
        Err(syntax(self.line, "unterminated string"))
    }

    fn arrow(&mut self) -> Result<(), TaxonomyError> {
        self.skip_ws();
        match self.rest.strip_prefix("->") {
            Some(rest) => {
                self.rest = rest;
                Ok(())
            }
            None => Err(syntax(self.line, "expected `->`")),
        }
    }

    fn end(&mut self) -> Result<(), TaxonomyError> {
        self.skip_ws();
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(syntax(self.line, format!("unexpected trailing text `{}`", self.rest)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_line;

    fn history(categories: &[&str]) -> UserHistory {
        let mut h = UserHistory::new("u");
        for (i, cat) in categories.iter().enumerate() {
            let line = format!(
                "u\tv{i}\tc\t{cat}\t40.7\t-73.9\t-240\tTue Apr 03 1{i}:00:00 +0000 2012"
            );
            h.records.push(parse_line(&line, i + 1).unwrap());
        }
        h
    }

    #[test]
    fn parses_substring_rule() {
        let tax = LabelTaxonomy::parse("t", r#"substring "thai" -> "Thai restaurant""#).unwrap();
        assert_eq!(tax.rules().len(), 1);
        assert_eq!(tax.rules()[0].kind(), MatchKind::Substring);
        assert_eq!(tax.rules()[0].pattern(), "thai");
        assert_eq!(tax.rules()[0].label(), "Thai restaurant");
        assert_eq!(tax.default_policy(), &DefaultPolicy::Passthrough);
    }

    #[test]
    fn empty_file_is_identity() {
        let tax = LabelTaxonomy::parse("t", "").unwrap();
        assert!(tax.rules().is_empty());
        assert_eq!(tax.default_policy(), &DefaultPolicy::Passthrough);
    }

    #[test]
    fn missing_keyword_is_syntax_error() {
        let text = "# rules\n\n-> \"X\"\n";
        match LabelTaxonomy::parse("t", text) {
            Err(TaxonomyError::Syntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn other_syntax_errors() {
        for (text, line) in [
            ("fuzzy \"a\" -> \"b\"", 1),
            ("exact \"a\" \"b\"", 1),
            ("exact \"a -> \"b\"", 1),
            ("exact \"a\" -> \"b\" trailing", 1),
            ("default passthrough\nexact \"a\" -> \"b\"", 2),
            ("default sometimes", 1),
        ] {
            match LabelTaxonomy::parse("t", text) {
                Err(TaxonomyError::Syntax { line: got, .. }) => assert_eq!(got, line, "{text}"),
                other => panic!("{text}: expected syntax error, got {other:?}"),
            }
        }
    }

    #[test]
    fn empty_labels_rejected() {
        assert!(matches!(
            LabelTaxonomy::parse("t", "exact \"a\" -> \"\""),
            Err(TaxonomyError::EmptyLabel { line: 1 })
        ));
        assert!(matches!(
            LabelTaxonomy::parse("t", "# x\ndefault \"\""),
            Err(TaxonomyError::EmptyLabel { line: 2 })
        ));
    }

    #[test]
    fn escapes_and_text_roundtrip() {
        let text = r#"exact "say \"hi\"" -> "back\\slash"
default "Other"
"#;
        let tax = LabelTaxonomy::parse("t", text).unwrap();
        assert_eq!(tax.rules()[0].pattern(), "say \"hi\"");
        assert_eq!(tax.rules()[0].label(), "back\\slash");
        assert_eq!(LabelTaxonomy::parse("t", &tax.to_text()).unwrap(), tax);
    }

    #[test]
    fn thai_venue_is_relabeled() {
        let tax = LabelTaxonomy::parse("t", r#"substring "thai" -> "Thai restaurant""#).unwrap();
        let visits = relabel(&history(&["Caysorn Thai Restaurant", "Gym"]), &tax);
        assert_eq!(visits[0].label, "Thai restaurant");
        assert_eq!(visits[1].label, "Gym");
    }

    #[test]
    fn identity_keeps_category() {
        let h = history(&["Bar", "Office", "Bar"]);
        let labels: Vec<String> = relabel(&h, &LabelTaxonomy::identity())
            .into_iter()
            .map(|v| v.label)
            .collect();
        assert_eq!(labels, ["Bar", "Office", "Bar"]);
    }

    #[test]
    fn fixed_default_applies() {
        let tax = LabelTaxonomy::parse("t", "prefix \"thai\" -> \"Thai\"\ndefault \"Other\"").unwrap();
        let visits = relabel(&history(&["Gym"]), &tax);
        assert_eq!(visits[0].label, "Other");
    }

    #[test]
    fn match_kinds_and_case() {
        let tax = LabelTaxonomy::parse(
            "t",
            "exact \"BAR\" -> \"exact\"\nprefix \"coffee\" -> \"prefix\"\nsubstring \"food\" -> \"sub\"",
        )
        .unwrap();
        assert_eq!(tax.label_for("bar"), "exact");
        assert_eq!(tax.label_for("Bars"), "Bars");
        assert_eq!(tax.label_for("Coffee Shop"), "prefix");
        assert_eq!(tax.label_for("Iced Coffee"), "Iced Coffee");
        assert_eq!(tax.label_for("Fast FOOD Restaurant"), "sub");
    }

    #[test]
    fn first_match_wins() {
        let tax = LabelTaxonomy::parse(
            "t",
            "substring \"thai\" -> \"Thai\"\nsubstring \"restaurant\" -> \"Restaurant\"",
        )
        .unwrap();
        assert_eq!(tax.label_for("Thai Restaurant"), "Thai");
        assert_eq!(tax.label_for("Pizza Restaurant"), "Restaurant");
    }

    #[test]
    fn relabel_copies_time_and_provenance() {
        let h = history(&["Bar"]);
        let v = &relabel(&h, &LabelTaxonomy::identity())[0];
        assert_eq!(v.utc_time, h.records[0].utc_time);
        assert_eq!(v.tz_offset_minutes, -240);
        assert_eq!(v.venue_id, "v0");
        assert_eq!(v.user_id, "u");
    }
}
