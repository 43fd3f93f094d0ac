use std::collections::BTreeMap;

use crate::edit_engine::{tokenize, SEP};

use super::DatagenError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gender {
    Male,
    Female,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PronounCase {
    Subject,
    Object,
    Possessive,
    Locative,
}

/// One catalog entry. `tokens` is the whitespace tokenization of the surface
/// form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entity {
    pub tokens: Vec<String>,
    pub gender: Option<Gender>,
}

impl Entity {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Surface form with `'s` attached to the last token.
    pub fn possessive(&self) -> Vec<String> {
        let mut t = self.tokens.clone();
        if let Some(last) = t.last_mut() {
            last.push_str("'s");
        }
        t
    }

    pub fn pronoun(&self, case: PronounCase) -> &'static str {
        match (case, self.gender) {
            (PronounCase::Locative, _) => "there",
            (PronounCase::Subject, Some(Gender::Male)) => "he",
            (PronounCase::Object, Some(Gender::Male)) => "him",
            (PronounCase::Possessive, Some(Gender::Male)) => "his",
            (PronounCase::Subject, Some(Gender::Female)) => "she",
            (PronounCase::Object | PronounCase::Possessive, Some(Gender::Female)) => "her",
            (PronounCase::Subject | PronounCase::Object, None) => "it",
            (PronounCase::Possessive, None) => "its",
        }
    }
}

/// Which part of a catalog a draw may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntityPool {
    All,
    Train,
    Eval,
}

/// Every fifth entry (positions 4, 9, 14, ...) is reserved for evaluation.
pub fn in_eval_pool(position: usize) -> bool {
    position % 5 == 4
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntityCatalog {
    pub domain: String,
    pub entries: Vec<Entity>,
}

impl EntityCatalog {
    pub fn pool(&self, pool: EntityPool) -> Vec<&Entity> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(i, _)| match pool {
                EntityPool::All => true,
                EntityPool::Train => !in_eval_pool(*i),
                EntityPool::Eval => in_eval_pool(*i),
            })
            .map(|(_, e)| e)
            .collect()
    }
}

fn parse_err(file: &str, line: usize, msg: impl Into<String>) -> DatagenError {
    DatagenError::Parse {
        file: file.to_owned(),
        line,
        msg: msg.into(),
    }
}

fn content_lines(src: &str) -> impl Iterator<Item = (usize, &str)> {
    src.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// All entity catalogs, keyed by domain.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Catalogs {
    pub domains: BTreeMap<String, EntityCatalog>,
}

impl Catalogs {
    pub fn parse(src: &str) -> Result<Self, DatagenError> {
        const FILE: &str = "catalog";
        let mut domains: BTreeMap<String, EntityCatalog> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (ln, line) in content_lines(src) {
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(parse_err(FILE, ln, format!("bad domain name {name:?}")));
                }
                if name.ends_with(|c: char| c.is_ascii_digit()) {
                    return Err(parse_err(FILE, ln, "domain names may not end in a digit"));
                }
                if domains.contains_key(name) {
                    return Err(parse_err(FILE, ln, format!("duplicate domain {name:?}")));
                }
                domains.insert(
                    name.to_owned(),
                    EntityCatalog {
                        domain: name.to_owned(),
                        entries: Vec::new(),
                    },
                );
                current = Some(name.to_owned());
                continue;
            }
            let Some(domain) = &current else {
                return Err(parse_err(FILE, ln, "entry before the first [domain] header"));
            };
            let (surface, tag) = match line.split_once('|') {
                Some((s, t)) => (s.trim(), Some(t.trim())),
                None => (line, None),
            };
            let gender = match tag {
                None => None,
                Some("m") => Some(Gender::Male),
                Some("f") => Some(Gender::Female),
                Some(t) => return Err(parse_err(FILE, ln, format!("unknown gender tag {t:?}"))),
            };
            let tokens = tokenize(surface);
            if tokens.is_empty() {
                return Err(parse_err(FILE, ln, "empty surface form"));
            }
            if tokens.iter().any(|t| t.contains(SEP)) {
                return Err(parse_err(FILE, ln, format!("surface form may not contain {SEP}")));
            }
            let catalog = domains.get_mut(domain).expect("current domain exists");
            let entity = Entity { tokens, gender };
            if catalog.entries.contains(&entity) {
                return Err(parse_err(FILE, ln, format!("duplicate entry {:?}", entity.text())));
            }
            catalog.entries.push(entity);
        }
        if let Some((name, _)) = domains.iter().find(|(_, c)| c.entries.is_empty()) {
            return Err(parse_err(FILE, 0, format!("domain {name:?} has no entries")));
        }
        Ok(Catalogs { domains })
    }

    pub fn get(&self, domain: &str) -> Option<&EntityCatalog> {
        self.domains.get(domain)
    }

    pub fn total_entries(&self) -> usize {
        self.domains.values().map(|c| c.entries.len()).sum()
    }
}

/// Named phrase lists (correction phrases, interregna, fillers, ...).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PhraseInventory {
    pub lists: BTreeMap<String, Vec<Vec<String>>>,
}

impl PhraseInventory {
    pub fn parse(src: &str) -> Result<Self, DatagenError> {
        const FILE: &str = "phrases";
        let mut lists = BTreeMap::new();
        for (ln, line) in content_lines(src) {
            let Some((name, rest)) = line.split_once(':') else {
                return Err(parse_err(FILE, ln, "expected `name: phrase | phrase`"));
            };
            let name = name.trim();
            if name.is_empty() {
                return Err(parse_err(FILE, ln, "empty inventory name"));
            }
            let mut phrases = Vec::new();
            for p in rest.split('|') {
                let toks = tokenize(p);
                if toks.is_empty() {
                    return Err(parse_err(FILE, ln, "empty phrase"));
                }
                if toks.iter().any(|t| t.contains(SEP)) {
                    return Err(parse_err(FILE, ln, format!("phrase may not contain {SEP}")));
                }
                phrases.push(toks);
            }
            if lists.insert(name.to_owned(), phrases).is_some() {
                return Err(parse_err(FILE, ln, format!("duplicate inventory {name:?}")));
            }
        }
        Ok(PhraseInventory { lists })
    }

    pub fn get(&self, name: &str) -> Option<&[Vec<String>]> {
        self.lists.get(name).map(Vec::as_slice)
    }
}
