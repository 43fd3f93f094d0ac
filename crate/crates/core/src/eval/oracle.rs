use serde::{Deserialize, Serialize};

use crate::datagen::LabeledExample;
use crate::edit_engine::{apply_program, join_tokens, validate_program};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleMismatch {
    pub id: String,
    pub expected: String,
    /// Engine output, or the reason there was none.
    pub got: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleReport {
    pub checked: usize,
    pub mismatches: Vec<OracleMismatch>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Re-applies every gold program and compares with the stored rewrite.
/// Invalid programs count as mismatches even if the engine could still
/// produce the right string by dropping edits.
pub fn oracle_verify(examples: &[LabeledExample]) -> OracleReport {
    let mut mismatches = Vec::new();
    for e in examples {
        let expected = join_tokens(&e.rewrite);
        let got = e.sequence().map_err(|err| err.to_string()).and_then(|seq| {
            let report = validate_program(&seq, &e.program);
            if let Some(v) = report.violations.first() {
                return Err(format!("invalid program: {}", v.kind));
            }
            apply_program(&seq, &e.program).map(|r| r.text()).map_err(|err| err.to_string())
        });
        match got {
            Ok(text) if text == expected => {}
            Ok(text) => mismatches.push(OracleMismatch {
                id: e.id.clone(),
                expected,
                got: text,
            }),
            Err(reason) => mismatches.push(OracleMismatch {
                id: e.id.clone(),
                expected,
                got: format!("error: {reason}"),
            }),
        }
    }
    OracleReport {
        checked: examples.len(),
        mismatches,
    }
}
