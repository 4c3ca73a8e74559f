use std::fmt;
use std::str::FromStr;

use regex::Regex;

use super::TextError;

/// Catalogue shipped with the crate.
pub const DEFAULT_CATALOGUE: &str = include_str!("../../data/clean_rules.tsv");

/// Minimum length (in characters) of a cleaned news item.
pub const MIN_CLEAN_CHARS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleCategory {
    Primary,
    BeginsWith,
    EndsWith,
    General,
    FinalChecks,
}

impl RuleCategory {
    pub const ORDER: [RuleCategory; 5] = [
        RuleCategory::Primary,
        RuleCategory::BeginsWith,
        RuleCategory::EndsWith,
        RuleCategory::General,
        RuleCategory::FinalChecks,
    ];
}

impl FromStr for RuleCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "primary" => Ok(Self::Primary),
            "begins_with" | "beginswith" => Ok(Self::BeginsWith),
            "ends_with" | "endswith" => Ok(Self::EndsWith),
            "general" => Ok(Self::General),
            "final_checks" | "finalchecks" => Ok(Self::FinalChecks),
            other => Err(format!("unknown rule category `{other}`")),
        }
    }
}

impl fmt::Display for RuleCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Primary => "primary",
            Self::BeginsWith => "begins_with",
            Self::EndsWith => "ends_with",
            Self::General => "general",
            Self::FinalChecks => "final_checks",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleAction {
    /// Remove every match.
    Delete,
    /// Remove the first match and the remainder of the text.
    TruncateFrom,
    /// Remove everything up to and including the first match.
    TruncateBefore,
    /// Replace every match with a single space.
    Replace,
}

impl FromStr for RuleAction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "delete" => Ok(Self::Delete),
            "truncate_from" | "truncatefrom" => Ok(Self::TruncateFrom),
            "truncate_before" | "truncatebefore" => Ok(Self::TruncateBefore),
            "replace" => Ok(Self::Replace),
            other => Err(format!("unknown rule action `{other}`")),
        }
    }
}

impl fmt::Display for RuleAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Delete => "delete",
            Self::TruncateFrom => "truncate_from",
            Self::TruncateBefore => "truncate_before",
            Self::Replace => "replace",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct CleanRule {
    pub rule_id: String,
    pub category: RuleCategory,
    pub action: RuleAction,
    pub pattern: Regex,
}

impl CleanRule {
    pub fn new(
        rule_id: impl Into<String>,
        category: RuleCategory,
        action: RuleAction,
        pattern: &str,
    ) -> Result<Self, regex::Error> {
        Ok(Self {
            rule_id: rule_id.into(),
            category,
            action,
            pattern: Regex::new(pattern)?,
        })
    }

    pub fn apply(&self, text: &str) -> String {
        match self.action {
            RuleAction::Delete => self.pattern.replace_all(text, "").into_owned(),
            RuleAction::Replace => self.pattern.replace_all(text, " ").into_owned(),
            RuleAction::TruncateFrom => match self.pattern.find(text) {
                Some(m) => text[..m.start()].to_string(),
                None => text.to_string(),
            },
            RuleAction::TruncateBefore => match self.pattern.find(text) {
                Some(m) => text[m.end()..].to_string(),
                None => text.to_string(),
            },
        }
    }
}

/// An ordered rule catalogue. Rules keep their declaration order inside each
/// category; categories always run in [`RuleCategory::ORDER`].
#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: Vec<CleanRule>,
}

impl RuleSet {
    pub fn new(rules: Vec<CleanRule>) -> Self {
        let mut rules = rules;
        // stable: preserves declared order within a category
        rules.sort_by_key(|r| r.category);
        Self { rules }
    }

    pub fn empty() -> Self {
        Self { rules: Vec::new() }
    }

    /// Parse the tab-separated catalogue format
    /// (`rule_id<TAB>category<TAB>action<TAB>pattern`, `#` comments).
    pub fn parse(text: &str) -> Result<Self, TextError> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let bad = |msg: String| TextError::Catalogue { line: i + 1, msg };
            let mut parts = line.splitn(4, '\t');
            let id = parts.next().unwrap_or_default().trim();
            let (cat, act, pat) = match (parts.next(), parts.next(), parts.next()) {
                (Some(c), Some(a), Some(p)) => (c.trim(), a.trim(), p),
                _ => return Err(bad("expected 4 tab-separated fields".into())),
            };
            if id.is_empty() {
                return Err(bad("empty rule id".into()));
            }
            let category = cat.parse().map_err(bad)?;
            let action = act.parse().map_err(bad)?;
            let rule = CleanRule::new(id, category, action, pat).map_err(|e| bad(e.to_string()))?;
            rules.push(rule);
        }
        Ok(Self::new(rules))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, TextError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn rules(&self) -> &[CleanRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

impl Default for RuleSet {
    fn default() -> Self {
        Self::parse(DEFAULT_CATALOGUE).expect("bundled catalogue parses")
    }
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercase, run every rule category in order, normalise whitespace and
/// reject items that end up empty or shorter than [`MIN_CLEAN_CHARS`].
pub fn clean_text(raw: &str, rules: &RuleSet) -> Result<String, TextError> {
    let mut text = raw.to_lowercase();
    for rule in &rules.rules {
        text = rule.apply(&text);
    }
    let text = collapse_whitespace(&text);
    if text.is_empty() {
        return Err(TextError::EmptyAfterClean);
    }
    let len = text.chars().count();
    if len < MIN_CLEAN_CHARS {
        return Err(TextError::TooShort { len });
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules() -> RuleSet {
        RuleSet::default()
    }

    #[test]
    fn bundled_catalogue_covers_every_category() {
        let rs = rules();
        for cat in RuleCategory::ORDER {
            assert!(rs.rules().iter().any(|r| r.category == cat), "{cat}");
        }
        // categories appear in order
        let cats: Vec<_> = rs.rules().iter().map(|r| r.category).collect();
        let mut sorted = cats.clone();
        sorted.sort();
        assert_eq!(cats, sorted);
    }

    #[test]
    fn links_are_removed() {
        let out = clean_text(
            "Visit URL http://x.y for more details on the quarterly figures",
            &rules(),
        )
        .unwrap();
        assert!(!out.contains("http"));
        assert!(!out.contains("x.y"));
        assert_eq!(out, "visit url for more details on the quarterly figures");
    }

    #[test]
    fn case_folding_only() {
        let out = clean_text("ALL CAPS TEXT THAT IS LONG ENOUGH TO KEEP", &RuleSet::empty()).unwrap();
        assert_eq!(out, "all caps text that is long enough to keep");
        let out = clean_text("ALL CAPS TEXT ABOUT NASDAQ SHARES", &rules()).unwrap();
        assert_eq!(out, "all caps text about nasdaq shares");
    }

    #[test]
    fn short_and_empty_items_rejected() {
        let twenty = "abcdefghij klmnopqrs";
        assert_eq!(twenty.len(), 20);
        assert!(matches!(clean_text(twenty, &rules()), Err(TextError::TooShort { len: 20 })));
        assert!(matches!(clean_text("   ", &rules()), Err(TextError::EmptyAfterClean)));
        assert!(matches!(
            clean_text("http://only.a.link/here", &rules()),
            Err(TextError::EmptyAfterClean)
        ));
    }

    #[test]
    fn emails_phones_and_boilerplate() {
        let raw = "Apple shares rose 4.2% after the results.\n\
                   Write to Jane Doe at jane.doe@dowjones.com\n\
                   Contact: investor desk 212-555-0100\n\
                   (END) Dow Jones Newswires\nmore junk";
        let out = clean_text(raw, &rules()).unwrap();
        assert_eq!(out, "apple shares rose 4.2% after the results.");
        let raw = "profit warning issued, call (212) 555-0100 or mail ir@corp.com today";
        let out = clean_text(raw, &rules()).unwrap();
        assert!(!out.contains("555"));
        assert!(!out.contains('@'));
    }

    #[test]
    fn markup_is_stripped() {
        let raw = "<p>Intel&amp;AMD <b>chip</b> sales beat expectations</p>\
                   <table><tr><td>1</td></tr></table>";
        let out = clean_text(raw, &rules()).unwrap();
        assert_eq!(out, "intel amd chip sales beat expectations");
    }

    #[test]
    fn truncate_before_action() {
        let rule = CleanRule::new("T", RuleCategory::General, RuleAction::TruncateBefore, "--").unwrap();
        assert_eq!(rule.apply("new york -- shares fell"), " shares fell");
        assert_eq!(rule.apply("no marker"), "no marker");
    }

    #[test]
    fn catalogue_parse_errors() {
        assert!(matches!(RuleSet::parse("X1\tgeneral\tdelete"), Err(TextError::Catalogue { line: 1, .. })));
        assert!(RuleSet::parse("X1\tbogus\tdelete\tfoo").is_err());
        assert!(RuleSet::parse("X1\tgeneral\tdelete\t(").is_err());
        let rs = RuleSet::parse("# c\n\nX1\tgeneral\tdelete\tfoo\n").unwrap();
        assert_eq!(rs.len(), 1);
    }

    #[test]
    fn idempotent_on_fixtures() {
        let fixtures = [
            "Visit URL http://x.y for more details on the quarterly figures",
            "<p>Intel&amp;AMD <b>chip</b> sales beat expectations</p>",
            "Apple shares rose 4.2% after the results.\nWrite to Jane at j@d.com\n(END) Dow Jones",
            "Microsoft Q3 revenue $4.2m up -- analysts see more gains ahead ===",
            "follow us on twitter: @acme\nThe bank cut rates by 25 basis points on Tuesday.",
            "copyright 2015 acme corp\nOil prices slump as OPEC output climbs to record (more to follow)",
        ];
        let rs = rules();
        for f in fixtures {
            let once = clean_text(f, &rs).unwrap();
            let twice = clean_text(&once, &rs).unwrap();
            assert_eq!(once, twice, "fixture: {f}");
        }
    }
}
