use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Maximum length of a single name component in bytes.
pub const MAX_COMPONENT_LEN: usize = 64;
/// Maximum number of components in a name.
pub const MAX_COMPONENTS: usize = 16;

/// Trailing component that turns a topic name into a topic query.
pub const TOPIC_QUERY_MARKER: &[u8] = b"_topics";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NameError {
    #[error("empty name component")]
    EmptyComponent,
    #[error("name component of {0} bytes exceeds {MAX_COMPONENT_LEN}")]
    ComponentTooLong(usize),
    #[error("name with {0} components exceeds {MAX_COMPONENTS}")]
    TooManyComponents(usize),
    #[error("invalid percent escape in {0:?}")]
    BadEscape(String),
    #[error("name must start with '/': {0:?}")]
    MissingSlash(String),
}

/// Hierarchical content identifier, e.g. `/rho/s1/t0`.
///
/// Components are non-empty byte strings of at most [`MAX_COMPONENT_LEN`]
/// bytes. The empty name (`/`) is a valid value but never appears on the
/// data plane; the codec rejects it in Interests and Data.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name {
    components: Vec<Vec<u8>>,
}

impl Name {
    pub fn root() -> Self {
        Name::default()
    }

    pub fn from_components<I, C>(components: I) -> Result<Self, NameError>
    where
        I: IntoIterator<Item = C>,
        C: Into<Vec<u8>>,
    {
        let components: Vec<Vec<u8>> = components.into_iter().map(Into::into).collect();
        if components.len() > MAX_COMPONENTS {
            return Err(NameError::TooManyComponents(components.len()));
        }
        for c in &components {
            check_component(c)?;
        }
        Ok(Name { components })
    }

    pub fn components(&self) -> &[Vec<u8>] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Returns a new name with `component` appended.
    pub fn child(&self, component: impl Into<Vec<u8>>) -> Result<Self, NameError> {
        let component = component.into();
        check_component(&component)?;
        if self.components.len() >= MAX_COMPONENTS {
            return Err(NameError::TooManyComponents(self.components.len() + 1));
        }
        let mut components = self.components.clone();
        components.push(component);
        Ok(Name { components })
    }

    /// True iff every component of `self` equals the corresponding leading
    /// component of `name`.
    pub fn is_prefix_of(&self, name: &Name) -> bool {
        self.components.len() <= name.components.len()
            && self
                .components
                .iter()
                .zip(&name.components)
                .all(|(a, b)| a == b)
    }

    /// Number of bytes this name occupies in the TLV encoding.
    pub fn encoded_len(&self) -> usize {
        1 + self.components.iter().map(|c| 1 + c.len()).sum::<usize>()
    }

    /// The query name used to ask a content proxy for the names indexed
    /// under this topic.
    pub fn topic_query(&self) -> Result<Name, NameError> {
        self.child(TOPIC_QUERY_MARKER)
    }

    pub fn is_topic_query(&self) -> bool {
        self.components.last().map(Vec::as_slice) == Some(TOPIC_QUERY_MARKER)
    }

    /// For a topic query, the topic it asks about.
    pub fn queried_topic(&self) -> Option<Name> {
        if !self.is_topic_query() {
            return None;
        }
        Some(Name {
            components: self.components[..self.components.len() - 1].to_vec(),
        })
    }
}

/// Free-function form of [`Name::is_prefix_of`].
pub fn is_prefix_of(prefix: &Name, name: &Name) -> bool {
    prefix.is_prefix_of(name)
}

fn check_component(c: &[u8]) -> Result<(), NameError> {
    if c.is_empty() {
        return Err(NameError::EmptyComponent);
    }
    if c.len() > MAX_COMPONENT_LEN {
        return Err(NameError::ComponentTooLong(c.len()));
    }
    Ok(())
}

fn needs_escape(c: &[u8]) -> bool {
    match std::str::from_utf8(c) {
        Ok(s) => s.chars().any(|ch| ch == '/' || ch == '%' || ch.is_control() || ch.is_whitespace()),
        Err(_) => true,
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return f.write_str("/");
        }
        for c in &self.components {
            f.write_str("/")?;
            if needs_escape(c) {
                for b in c {
                    if b.is_ascii_alphanumeric() || b"-._~".contains(b) {
                        write!(f, "{}", *b as char)?;
                    } else {
                        write!(f, "%{b:02X}")?;
                    }
                }
            } else {
                // checked by needs_escape
                f.write_str(std::str::from_utf8(c).unwrap_or_default())?;
            }
        }
        Ok(())
    }
}

impl FromStr for Name {
    type Err = NameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rest = s
            .strip_prefix('/')
            .ok_or_else(|| NameError::MissingSlash(s.to_string()))?;
        if rest.is_empty() {
            return Ok(Name::root());
        }
        let mut components = Vec::new();
        for part in rest.split('/') {
            components.push(unescape(part).ok_or_else(|| NameError::BadEscape(part.to_string()))?);
        }
        Name::from_components(components)
    }
}

fn unescape(part: &str) -> Option<Vec<u8>> {
    let bytes = part.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = part.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    Some(out)
}

impl Serialize for Name {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Name {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Name {
        s.parse().unwrap()
    }

    #[test]
    fn prefix_matching() {
        assert!(is_prefix_of(&n("/ρ"), &n("/ρ/s1/t0")));
        assert!(!is_prefix_of(&n("/ρ/s1/t0"), &n("/ρ")));
        assert!(is_prefix_of(&n("/ρ"), &n("/ρ")));
        assert!(!is_prefix_of(&n("/ρ/a"), &n("/ρ/ab")));
        assert!(is_prefix_of(&Name::root(), &n("/x")));
    }

    #[test]
    fn display_round_trips_escapes() {
        let odd = Name::from_components([b"a/b".to_vec(), vec![0xff, 0x00], b"100%".to_vec()]).unwrap();
        let text = odd.to_string();
        assert_eq!(text, "/a%2Fb/%FF%00/100%25");
        assert_eq!(text.parse::<Name>().unwrap(), odd);
        assert_eq!(n("/ρ/s1").to_string(), "/ρ/s1");
    }

    #[test]
    fn size_caps() {
        assert_eq!(
            Name::from_components([vec![b'x'; 65]]),
            Err(NameError::ComponentTooLong(65))
        );
        assert_eq!(Name::from_components([Vec::<u8>::new()]), Err(NameError::EmptyComponent));
        let many: Vec<Vec<u8>> = (0..17).map(|i| format!("c{i}").into_bytes()).collect();
        assert_eq!(Name::from_components(many), Err(NameError::TooManyComponents(17)));
        assert!("rho".parse::<Name>().is_err());
        assert!("/a//b".parse::<Name>().is_err());
    }

    #[test]
    fn topic_query_marker() {
        let q = n("/rho/temp").topic_query().unwrap();
        assert!(q.is_topic_query());
        assert_eq!(q.queried_topic(), Some(n("/rho/temp")));
        assert!(!n("/rho/temp").is_topic_query());
    }
}
