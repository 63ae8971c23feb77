//! The declarative text format used by scenario and config files.
//!
//! Line-oriented: `[section]` or `[section name]` headers, `key =
//! value` entries, `#` comments. Sections repeat; keys within a section
//! do not. Values are plain strings; typed accessors parse on demand
//! and every error carries the line it came from.
//!
//! ```text
//! # a comment
//! [scenario]
//! seed = 42
//!
//! [agent alice]
//! role = author
//! keywords = physics stat-mech
//! ```

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TextDocError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: [{section}] {message}")]
    Field {
        line: usize,
        section: String,
        message: String,
    },
}

impl TextDocError {
    fn field(section: &Section, message: impl Into<String>) -> Self {
        TextDocError::Field {
            line: section.line,
            section: section.heading(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub kind: String,
    /// The optional second word of the header (`[agent alice]` → "alice").
    pub name: Option<String>,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn heading(&self) -> String {
        match &self.name {
            Some(n) => format!("{} {}", self.kind, n),
            None => self.kind.clone(),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.key == key)
            .map(|e| e.value.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, TextDocError> {
        self.get(key)
            .ok_or_else(|| TextDocError::field(self, format!("missing key `{key}`")))
    }

    pub fn parse<T>(&self, key: &str) -> Result<T, TextDocError>
    where
        T: std::str::FromStr,
        T::Err: fmt::Display,
    {
        let raw = self.require(key)?;
        raw.parse().map_err(|e| {
            TextDocError::field(self, format!("key `{key}`: cannot parse `{raw}`: {e}"))
        })
    }

    pub fn parse_or<T>(&self, key: &str, default: T) -> Result<T, TextDocError>
    where
        T: std::str::FromStr,
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(_) => self.parse(key),
        }
    }

    /// Space-separated list value.
    pub fn words(&self, key: &str) -> Vec<String> {
        self.get(key)
            .map(|v| v.split_whitespace().map(str::to_string).collect())
            .unwrap_or_default()
    }

    pub fn error(&self, message: impl Into<String>) -> TextDocError {
        TextDocError::field(self, message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Document {
    pub sections: Vec<Section>,
}

impl Document {
    pub fn parse(text: &str) -> Result<Document, TextDocError> {
        let mut sections: Vec<Section> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if let Some(header) = trimmed.strip_prefix('[') {
                let header = header.strip_suffix(']').ok_or(TextDocError::Parse {
                    line,
                    message: "unterminated [section] header".into(),
                })?;
                let mut words = header.split_whitespace();
                let kind = words.next().ok_or(TextDocError::Parse {
                    line,
                    message: "empty section header".into(),
                })?;
                let name = words.next().map(str::to_string);
                if words.next().is_some() {
                    return Err(TextDocError::Parse {
                        line,
                        message: "section header takes at most one name".into(),
                    });
                }
                sections.push(Section {
                    kind: kind.to_string(),
                    name,
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(TextDocError::Parse {
                    line,
                    message: format!("expected `key = value`, got `{trimmed}`"),
                });
            };
            let section = sections.last_mut().ok_or(TextDocError::Parse {
                line,
                message: "entry before any [section]".into(),
            })?;
            let key = key.trim().to_string();
            if section.entries.iter().any(|e| e.key == key) {
                return Err(TextDocError::Parse {
                    line,
                    message: format!("duplicate key `{key}` in [{}]", section.heading()),
                });
            }
            section.entries.push(Entry {
                key,
                value: value.trim().to_string(),
                line,
            });
        }
        Ok(Document { sections })
    }

    pub fn sections_of<'a>(&'a self, kind: &str) -> impl Iterator<Item = &'a Section> + 'a {
        let kind = kind.to_string();
        self.sections.iter().filter(move |s| s.kind == kind)
    }

    pub fn section(&self, kind: &str) -> Option<&Section> {
        self.sections_of(kind).next()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_entries_and_comments() {
        let doc = Document::parse(
            "# top comment\n\
             [scenario]\n\
             seed = 42\n\
             \n\
             [agent alice]\n\
             role = author\n\
             keywords = physics math\n",
        )
        .unwrap();
        assert_eq!(doc.sections.len(), 2);
        let scenario = doc.section("scenario").unwrap();
        assert_eq!(scenario.parse::<u64>("seed").unwrap(), 42);
        let agent = doc.sections_of("agent").next().unwrap();
        assert_eq!(agent.name.as_deref(), Some("alice"));
        assert_eq!(agent.words("keywords"), vec!["physics", "math"]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = Document::parse("[scenario]\nbroken line\n").unwrap_err();
        assert_eq!(
            err,
            TextDocError::Parse {
                line: 2,
                message: "expected `key = value`, got `broken line`".into()
            }
        );
        let err = Document::parse("seed = 1\n").unwrap_err();
        assert!(matches!(err, TextDocError::Parse { line: 1, .. }));
        let err = Document::parse("[a]\nx = 1\nx = 2\n").unwrap_err();
        assert!(matches!(err, TextDocError::Parse { line: 3, .. }));
    }

    #[test]
    fn typed_accessors_report_the_field() {
        let doc = Document::parse("[scenario]\nseed = not-a-number\n").unwrap();
        let err = doc.section("scenario").unwrap().parse::<u64>("seed");
        assert!(matches!(err, Err(TextDocError::Field { line: 1, .. })));
        let ok = doc
            .section("scenario")
            .unwrap()
            .parse_or::<u64>("missing", 7)
            .unwrap();
        assert_eq!(ok, 7);
    }
}
