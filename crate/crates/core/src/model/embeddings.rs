//! External word vectors for the frozen embedding mode.

use std::collections::HashMap;
use std::io::BufRead;

use rand::Rng;

use super::tensor::{lit, Mat, Real};
use super::vocab::{Vocab, PAD};
use super::ModelError;

/// Builds an embedding table from word2vec text vectors (`token v1 .. vD`
/// per line, optional `count dim` header line).
///
/// Vocabulary entries without a vector get small random values from `rng`
/// so they stay distinguishable; PAD is zero. Returns the table and the
/// number of vocabulary entries found in the file.
pub fn load_word2vec_text<F: Real, B: BufRead, R: Rng>(
    reader: B,
    vocab: &Vocab,
    dim: usize,
    rng: &mut R,
) -> Result<(Mat<F>, usize), ModelError> {
    let mut found: HashMap<String, Vec<f64>> = HashMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else { continue };
        let vals: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
        let vals = vals.map_err(|e| ModelError::Embeddings(format!("line {}: {e}", n + 1)))?;
        if n == 0 && vals.len() == 1 && token.parse::<usize>().is_ok() {
            continue;
        }
        if vals.len() != dim {
            return Err(ModelError::Embeddings(format!(
                "line {}: expected {dim} values, found {}",
                n + 1,
                vals.len()
            )));
        }
        if !vals.iter().all(|v| v.is_finite()) {
            return Err(ModelError::Embeddings(format!("line {}: non-finite value", n + 1)));
        }
        if vocab.contains(token) {
            found.entry(token.to_owned()).or_insert(vals);
        }
    }
    let mut table = Mat::zeros(vocab.len(), dim);
    for (id, tok) in vocab.tokens().iter().enumerate() {
        let row = table.row_mut(id);
        match found.get(tok) {
            Some(v) => row.iter_mut().zip(v).for_each(|(d, &s)| *d = lit(s)),
            None if id as u32 == PAD => {}
            None => row.iter_mut().for_each(|d| *d = lit(rng.gen_range(-0.1..0.1))),
        }
    }
    Ok((table, found.len()))
}
