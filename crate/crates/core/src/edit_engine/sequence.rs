use serde::{Deserialize, Serialize};

use super::EngineError;

/// Literal text of the separator cell between context and follow-up.
pub const SEP: &str = "[SEP]";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    Context,
    Sep,
    Followup,
}

/// One token of the concatenated dialog history.
///
/// `id` is the original position in the concatenated sequence and never
/// changes, even after the cell has been moved by a substitution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenCell {
    pub id: usize,
    pub text: String,
    pub segment: Segment,
    pub deleted: bool,
}

/// Context turn, separator and follow-up turn as a single indexed sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSequence {
    cells: Vec<TokenCell>,
    sep: Option<usize>,
}

/// Whitespace tokenization. Case is preserved.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

fn check_token(token: &str) -> Result<(), EngineError> {
    if token.is_empty() {
        return Err(EngineError::InvalidInput("empty token".into()));
    }
    if token.chars().any(char::is_whitespace) {
        return Err(EngineError::InvalidInput(format!(
            "token {token:?} contains whitespace"
        )));
    }
    if token == SEP {
        return Err(EngineError::InvalidInput(format!(
            "{SEP} may not appear inside a turn"
        )));
    }
    Ok(())
}

impl TokenSequence {
    /// Concatenates `context ++ [SEP] ++ followup`. The separator is only
    /// inserted when the context is non-empty.
    pub fn concat_turns<S: AsRef<str>>(context: &[S], followup: &[S]) -> Result<Self, EngineError> {
        if followup.is_empty() {
            return Err(EngineError::InvalidInput("follow-up turn is empty".into()));
        }
        let mut cells = Vec::with_capacity(context.len() + followup.len() + 1);
        for tok in context {
            check_token(tok.as_ref())?;
            cells.push(TokenCell {
                id: cells.len(),
                text: tok.as_ref().to_owned(),
                segment: Segment::Context,
                deleted: false,
            });
        }
        let sep = if context.is_empty() {
            None
        } else {
            cells.push(TokenCell {
                id: cells.len(),
                text: SEP.to_owned(),
                segment: Segment::Sep,
                deleted: false,
            });
            Some(cells.len() - 1)
        };
        for tok in followup {
            check_token(tok.as_ref())?;
            cells.push(TokenCell {
                id: cells.len(),
                text: tok.as_ref().to_owned(),
                segment: Segment::Followup,
                deleted: false,
            });
        }
        Ok(TokenSequence { cells, sep })
    }

    /// Tokenizes both turns on whitespace and concatenates them.
    pub fn from_text(context: &str, followup: &str) -> Result<Self, EngineError> {
        Self::concat_turns(&tokenize(context), &tokenize(followup))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[TokenCell] {
        &self.cells
    }

    pub fn sep_index(&self) -> Option<usize> {
        self.sep
    }

    pub fn texts(&self) -> Vec<&str> {
        self.cells.iter().map(|c| c.text.as_str()).collect()
    }

    pub fn context(&self) -> Vec<&str> {
        match self.sep {
            Some(sep) => self.cells[..sep].iter().map(|c| c.text.as_str()).collect(),
            None => Vec::new(),
        }
    }

    pub fn followup(&self) -> Vec<&str> {
        let start = self.sep.map_or(0, |s| s + 1);
        self.cells[start..].iter().map(|c| c.text.as_str()).collect()
    }
}

/// Joins tokens with single spaces.
pub fn join_tokens<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t.as_ref());
    }
    out
}
