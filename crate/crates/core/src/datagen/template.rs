use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::edit_engine::{apply_program, validate_program, EditProgram, Span, TokenSequence, UseCase};

use super::catalog::{Catalogs, Entity, EntityPool, PhraseInventory, PronounCase};
use super::DatagenError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TemplatePool {
    /// Single-task templates, usable for every split.
    Any,
    Train,
    Eval,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotForm {
    Plain,
    Possessive,
    Pronoun(PronounCase),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpanRole {
    Replacement,
    Replaced,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Piece {
    Word(String),
    /// `var` names a slot, its domain is `var` without trailing digits.
    Slot { var: String, form: SlotForm },
    Phrase(String),
    OpenSpan(UseCase, SpanRole),
    OpenDeletion(UseCase),
    /// Closes the innermost open span (`]`) or deletion group (`>`).
    Close,
}

/// What happens to the separator cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SepRule {
    NoContext,
    Keep,
    Delete(UseCase),
}

/// A query template. The gold edits are part of the patterns: span and
/// deletion markup over pattern positions, resolved to token indices when
/// the template is instantiated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryTemplate {
    pub id: String,
    pub use_cases: Vec<UseCase>,
    pub pool: TemplatePool,
    pub context: Vec<Piece>,
    pub followup: Vec<Piece>,
    pub rewrite: Vec<Piece>,
    pub sep: SepRule,
}

/// An instantiated template with its gold program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub context: Vec<String>,
    pub followup: Vec<String>,
    pub rewrite: Vec<String>,
    pub program: EditProgram,
}

fn err(line: usize, msg: impl Into<String>) -> DatagenError {
    DatagenError::Parse {
        file: "templates".into(),
        line,
        msg: msg.into(),
    }
}

fn parse_use_case(s: &str, line: usize) -> Result<UseCase, DatagenError> {
    s.parse().map_err(|_| err(line, format!("unknown use case {s:?}")))
}

fn parse_piece(tok: &str, line: usize) -> Result<Piece, DatagenError> {
    if tok == "]" || tok == ">" {
        return Ok(Piece::Close);
    }
    if let Some(uc) = tok.strip_prefix("[rep.") {
        return Ok(Piece::OpenSpan(parse_use_case(uc, line)?, SpanRole::Replacement));
    }
    if let Some(uc) = tok.strip_prefix("[repd.") {
        return Ok(Piece::OpenSpan(parse_use_case(uc, line)?, SpanRole::Replaced));
    }
    if let Some(uc) = tok.strip_prefix("<del.") {
        return Ok(Piece::OpenDeletion(parse_use_case(uc, line)?));
    }
    if let Some(inner) = tok.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
        if let Some(name) = inner.strip_prefix('@') {
            return Ok(Piece::Phrase(name.to_owned()));
        }
        let (var, form) = if let Some((v, f)) = inner.split_once('~') {
            let case = match f {
                "subj" => PronounCase::Subject,
                "obj" => PronounCase::Object,
                "poss" => PronounCase::Possessive,
                "loc" => PronounCase::Locative,
                _ => return Err(err(line, format!("unknown pronoun case {f:?}"))),
            };
            (v, SlotForm::Pronoun(case))
        } else if let Some((v, f)) = inner.split_once(':') {
            if f != "poss" {
                return Err(err(line, format!("unknown slot form {f:?}")));
            }
            (v, SlotForm::Possessive)
        } else {
            (inner, SlotForm::Plain)
        };
        if var.is_empty() || !var.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(err(line, format!("bad slot name {var:?}")));
        }
        return Ok(Piece::Slot {
            var: var.to_owned(),
            form,
        });
    }
    if tok.starts_with(['[', '<', '{']) || tok.ends_with(['}']) {
        return Err(err(line, format!("unrecognized markup {tok:?}")));
    }
    Ok(Piece::Word(tok.to_owned()))
}

fn parse_pattern(src: &str, line: usize) -> Result<Vec<Piece>, DatagenError> {
    let pieces: Vec<Piece> = src
        .split_whitespace()
        .map(|t| parse_piece(t, line))
        .collect::<Result<_, _>>()?;
    // Markup must be balanced and close with the matching bracket kind.
    let mut stack = Vec::new();
    for (tok, p) in src.split_whitespace().zip(&pieces) {
        match p {
            Piece::OpenSpan(..) => stack.push(']'),
            Piece::OpenDeletion(_) => stack.push('>'),
            Piece::Close => {
                let want = stack.pop().ok_or_else(|| err(line, format!("unbalanced {tok:?}")))?;
                if !tok.starts_with(want) {
                    return Err(err(line, format!("expected {want:?}, found {tok:?}")));
                }
            }
            _ => {}
        }
    }
    if !stack.is_empty() {
        return Err(err(line, "unclosed markup"));
    }
    Ok(pieces)
}

fn slot_domain(var: &str) -> &str {
    var.trim_end_matches(|c: char| c.is_ascii_digit())
}

impl QueryTemplate {
    /// Parses a template file (grammar in `docs/data-formats.md`).
    pub fn parse_all(src: &str) -> Result<Vec<QueryTemplate>, DatagenError> {
        let mut out: Vec<QueryTemplate> = Vec::new();
        let mut block: Option<(usize, Vec<(usize, &str, &str)>)> = None;
        let mut blocks = Vec::new();
        for (i, raw) in src.lines().enumerate() {
            let ln = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('@') {
                if let Some(b) = block.take() {
                    blocks.push(b);
                }
                block = Some((ln, vec![(ln, "@", line)]));
                continue;
            }
            let Some((_, fields)) = block.as_mut() else {
                return Err(err(ln, "field outside a template block"));
            };
            let Some((key, rest)) = line.split_once(':') else {
                return Err(err(ln, "expected `KEY: value`"));
            };
            fields.push((ln, key.trim(), rest.trim()));
        }
        if let Some(b) = block.take() {
            blocks.push(b);
        }
        for (start, fields) in blocks {
            let t = Self::parse_block(start, &fields)?;
            if out.iter().any(|o| o.id == t.id) {
                return Err(err(start, format!("duplicate template id {:?}", t.id)));
            }
            out.push(t);
        }
        Ok(out)
    }

    fn parse_block(start: usize, fields: &[(usize, &str, &str)]) -> Result<QueryTemplate, DatagenError> {
        let header: Vec<&str> = fields[0].2[1..].split_whitespace().collect();
        let [id, ucs, pool] = header[..] else {
            return Err(err(start, "header must be `@id use-cases pool`"));
        };
        let mut use_cases: Vec<UseCase> = ucs
            .split(',')
            .map(|u| parse_use_case(u, start))
            .collect::<Result<_, _>>()?;
        use_cases.sort();
        use_cases.dedup();
        let pool = match pool {
            "any" => TemplatePool::Any,
            "train" => TemplatePool::Train,
            "eval" => TemplatePool::Eval,
            p => return Err(err(start, format!("unknown pool {p:?}"))),
        };
        let get = |key: &str| -> Result<Option<(usize, &str)>, DatagenError> {
            let hits: Vec<_> = fields[1..].iter().filter(|f| f.1 == key).collect();
            match hits.len() {
                0 => Ok(None),
                1 => Ok(Some((hits[0].0, hits[0].2))),
                _ => Err(err(hits[1].0, format!("repeated field {key}"))),
            }
        };
        if let Some(f) = fields[1..].iter().find(|f| !["C", "F", "R", "S"].contains(&f.1)) {
            return Err(err(f.0, format!("unknown field {:?}", f.1)));
        }
        let context = match get("C")? {
            Some((ln, s)) => parse_pattern(s, ln)?,
            None => Vec::new(),
        };
        let (fl, fs) = get("F")?.ok_or_else(|| err(start, "missing F:"))?;
        let followup = parse_pattern(fs, fl)?;
        let (rl, rs) = get("R")?.ok_or_else(|| err(start, "missing R:"))?;
        let rewrite = parse_pattern(rs, rl)?;
        if rewrite.iter().any(|p| !matches!(p, Piece::Word(_) | Piece::Slot { .. })) {
            return Err(err(rl, "rewrite patterns hold only words and slots"));
        }
        let sep = match (context.is_empty(), get("S")?) {
            (true, None) => SepRule::NoContext,
            (true, Some((ln, _))) => return Err(err(ln, "S: without a context")),
            (false, None) => return Err(err(start, "missing S:")),
            (false, Some((_, "keep"))) => SepRule::Keep,
            (false, Some((ln, uc))) => SepRule::Delete(parse_use_case(uc, ln)?),
        };
        let t = QueryTemplate {
            id: id.to_owned(),
            use_cases,
            pool,
            context,
            followup,
            rewrite,
            sep,
        };
        t.check_markup(start)?;
        Ok(t)
    }

    fn check_markup(&self, line: usize) -> Result<(), DatagenError> {
        let mut marked = BTreeSet::new();
        let mut roles: BTreeMap<(UseCase, bool), usize> = BTreeMap::new();
        for p in self.context.iter().chain(&self.followup) {
            let (uc, key) = match p {
                Piece::OpenSpan(uc, r) => (*uc, Some(*r == SpanRole::Replacement)),
                Piece::OpenDeletion(uc) => (*uc, None),
                _ => continue,
            };
            if !self.use_cases.contains(&uc) {
                return Err(err(line, format!("{}: markup for undeclared use case {uc}", self.id)));
            }
            marked.insert(uc);
            if let Some(k) = key {
                *roles.entry((uc, k)).or_default() += 1;
            }
        }
        if let SepRule::Delete(uc) = self.sep {
            if !self.use_cases.contains(&uc) {
                return Err(err(line, format!("{}: separator owner {uc} not declared", self.id)));
            }
            marked.insert(uc);
        }
        if roles.values().any(|&n| n > 1) {
            return Err(err(line, format!("{}: more than one span per role", self.id)));
        }
        for uc in &self.use_cases {
            if roles.contains_key(&(*uc, true)) != roles.contains_key(&(*uc, false)) {
                return Err(err(line, format!("{}: {uc} needs both a replacement and a replaced span", self.id)));
            }
            if !marked.contains(uc) {
                return Err(err(line, format!("{}: no edits for {uc}", self.id)));
            }
        }
        Ok(())
    }

    /// Slot variables in order of first appearance.
    pub fn slot_vars(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for p in self.context.iter().chain(&self.followup).chain(&self.rewrite) {
            if let Piece::Slot { var, .. } = p {
                if !out.contains(&var.as_str()) {
                    out.push(var);
                }
            }
        }
        out
    }

    /// Checks that every slot domain and phrase inventory exists and that
    /// the catalogs hold enough distinct entries for `pool`.
    pub fn check_resources(
        &self,
        catalogs: &Catalogs,
        phrases: &PhraseInventory,
        pool: EntityPool,
    ) -> Result<(), DatagenError> {
        let mut need: BTreeMap<&str, usize> = BTreeMap::new();
        for v in self.slot_vars() {
            *need.entry(slot_domain(v)).or_default() += 1;
        }
        for (domain, n) in need {
            let have = catalogs
                .get(domain)
                .ok_or_else(|| DatagenError::UnknownDomain {
                    template: self.id.clone(),
                    domain: domain.to_owned(),
                })?
                .pool(pool)
                .len();
            if have < n {
                return Err(DatagenError::InsufficientEntities {
                    domain: domain.to_owned(),
                    need: n,
                    have,
                });
            }
        }
        for p in self.context.iter().chain(&self.followup) {
            if let Piece::Phrase(name) = p {
                if phrases.get(name).is_none() {
                    return Err(DatagenError::UnknownInventory {
                        template: self.id.clone(),
                        name: name.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Fills every slot with a random entity from `pool` (distinct within a
    /// domain) and every phrase reference with a random phrase, then builds
    /// the gold program and checks it against the engine.
    pub fn instantiate<R: Rng>(
        &self,
        catalogs: &Catalogs,
        phrases: &PhraseInventory,
        pool: EntityPool,
        rng: &mut R,
    ) -> Result<Instance, DatagenError> {
        self.check_resources(catalogs, phrases, pool)?;
        let mut filled: BTreeMap<&str, &Entity> = BTreeMap::new();
        let mut by_domain: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for v in self.slot_vars() {
            by_domain.entry(slot_domain(v)).or_default().push(v);
        }
        for (domain, vars) in by_domain {
            let entries = catalogs.get(domain).expect("checked").pool(pool);
            let picks = entries.choose_multiple(rng, vars.len());
            for (v, e) in vars.into_iter().zip(picks) {
                filled.insert(v, e);
            }
        }
        let ctx = expand(&self.context, &filled, phrases, rng);
        let fu = expand(&self.followup, &filled, phrases, rng);
        let rewrite = expand(&self.rewrite, &filled, phrases, rng).tokens;

        let offset = if ctx.tokens.is_empty() { 0 } else { ctx.tokens.len() + 1 };
        let mut program = EditProgram::empty();
        let mut spans: BTreeMap<(UseCase, bool), Span> = BTreeMap::new();
        for (turn, off) in [(&ctx, 0), (&fu, offset)] {
            for &(uc, role, s, e) in &turn.spans {
                spans.insert((uc, role == SpanRole::Replacement), Span::new(s + off, e + off));
            }
            for &(uc, i) in &turn.deletions {
                program.get_mut(uc).deletions.insert(i + off);
            }
        }
        for uc in &self.use_cases {
            if let (Some(rep), Some(repd)) = (spans.get(&(*uc, true)), spans.get(&(*uc, false))) {
                program.set_substitution(*uc, *rep, *repd);
            }
        }
        if let SepRule::Delete(uc) = self.sep {
            program.get_mut(uc).deletions.insert(ctx.tokens.len());
        }
        let inst = Instance {
            context: ctx.tokens,
            followup: fu.tokens,
            rewrite,
            program,
        };
        self.verify(&inst)?;
        Ok(inst)
    }

    fn verify(&self, inst: &Instance) -> Result<(), DatagenError> {
        let bad = |detail: String| DatagenError::TemplateInconsistent {
            id: self.id.clone(),
            detail,
        };
        let seq = TokenSequence::concat_turns(&inst.context, &inst.followup).map_err(|e| bad(e.to_string()))?;
        let report = validate_program(&seq, &inst.program);
        if !report.is_valid() {
            return Err(bad(format!("invalid gold program: {:?}", report.violations)));
        }
        // One pointer row per boundary: a one-token replacement addresses
        // both ends of the replaced span from the same row.
        for s in inst.program.substitutions() {
            if s.replacement.len() == 1 && s.replaced.len() != 1 {
                return Err(bad(format!("{}: one-token replacement for a longer replaced span", s.use_case)));
            }
        }
        let got = apply_program(&seq, &inst.program).map_err(|e| bad(e.to_string()))?;
        if got.tokens != inst.rewrite {
            return Err(bad(format!("engine gives {:?}, pattern gives {:?}", got.text(), inst.rewrite.join(" "))));
        }
        if inst.rewrite == inst.followup {
            return Err(bad("rewrite equals the follow-up".into()));
        }
        Ok(())
    }
}

struct Expanded {
    tokens: Vec<String>,
    spans: Vec<(UseCase, SpanRole, usize, usize)>,
    deletions: Vec<(UseCase, usize)>,
}

enum Open {
    Span(UseCase, SpanRole, usize),
    Deletion(UseCase, usize),
}

fn expand<R: Rng>(
    pieces: &[Piece],
    filled: &BTreeMap<&str, &Entity>,
    phrases: &PhraseInventory,
    rng: &mut R,
) -> Expanded {
    let mut out = Expanded {
        tokens: Vec::new(),
        spans: Vec::new(),
        deletions: Vec::new(),
    };
    let mut stack: Vec<Open> = Vec::new();
    for p in pieces {
        match p {
            Piece::Word(w) => out.tokens.push(w.clone()),
            Piece::Slot { var, form } => {
                let e = filled[var.as_str()];
                match form {
                    SlotForm::Plain => out.tokens.extend(e.tokens.iter().cloned()),
                    SlotForm::Possessive => out.tokens.extend(e.possessive()),
                    SlotForm::Pronoun(case) => out.tokens.push(e.pronoun(*case).to_owned()),
                }
            }
            Piece::Phrase(name) => {
                let list = phrases.get(name).expect("checked");
                out.tokens.extend(list.choose(rng).expect("non-empty").iter().cloned());
            }
            Piece::OpenSpan(uc, role) => stack.push(Open::Span(*uc, *role, out.tokens.len())),
            Piece::OpenDeletion(uc) => stack.push(Open::Deletion(*uc, out.tokens.len())),
            Piece::Close => match stack.pop().expect("balanced") {
                Open::Span(uc, role, s) => out.spans.push((uc, role, s, out.tokens.len())),
                Open::Deletion(uc, s) => out.deletions.extend((s..out.tokens.len()).map(|i| (uc, i))),
            },
        }
    }
    out
}
