use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::edit_engine::UseCase;

use super::catalog::EntityPool;
use super::template::{QueryTemplate, TemplatePool};
use super::{DatagenError, LabeledExample, Resources, Split};

/// Use-case pairs covered by compositional templates, canonical order
/// within each pair.
pub const CHALLENGE_PAIRS: [[UseCase; 2]; 5] = [
    [UseCase::Intent, UseCase::Entity],
    [UseCase::Entity, UseCase::Repair],
    [UseCase::Intent, UseCase::Disfluency],
    [UseCase::Repair, UseCase::Disfluency],
    [UseCase::Disfluency, UseCase::Steering],
];

/// Train/valid/test sizes for an 8:1:1 split, rounding half up.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = (8 * n + 5) / 10;
    let valid = (n + 5) / 10;
    let valid = valid.min(n - train);
    (train, valid, n - train - valid)
}

fn split_of(i: usize, n: usize) -> Split {
    let (train, valid, _) = split_sizes(n);
    if i < train {
        Split::Train
    } else if i < train + valid {
        Split::Valid
    } else {
        Split::Test
    }
}

/// Independent generator per example, so examples can be produced in any
/// order or in parallel.
fn example_rng(seed: u64, stream: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream << 32) | index as u64);
    rng
}

fn make_example(
    res: &Resources,
    templates: &[&QueryTemplate],
    pool: EntityPool,
    rng: &mut ChaCha8Rng,
    id: String,
    split: Split,
) -> Result<LabeledExample, DatagenError> {
    let t = templates[rng.gen_range(0..templates.len())];
    let inst = t.instantiate(&res.catalogs, &res.phrases, pool, rng)?;
    Ok(LabeledExample {
        id,
        use_cases: t.use_cases.clone(),
        context: inst.context,
        followup: inst.followup,
        rewrite: inst.rewrite,
        split,
        program: inst.program,
        template: Some(t.id.clone()),
    })
}

/// `n` examples for one use case, split 8:1:1 by position.
pub fn generate_single_task(
    res: &Resources,
    use_case: UseCase,
    n: usize,
    seed: u64,
) -> Result<Vec<LabeledExample>, DatagenError> {
    if n == 0 {
        return Err(DatagenError::InvalidCount);
    }
    let templates = res.single_task_templates(use_case);
    if templates.is_empty() {
        return Err(DatagenError::NoTemplates(use_case.to_string()));
    }
    (0..n)
        .map(|i| {
            let mut rng = example_rng(seed, 1 + use_case.index() as u64, i);
            let id = format!("{use_case}-{i:06}");
            make_example(res, &templates, EntityPool::All, &mut rng, id, split_of(i, n))
        })
        .collect()
}

/// `n` compositional examples. Train and valid examples use train-pool
/// templates and entities, test examples use the eval pools.
pub fn generate_compositional(res: &Resources, n: usize, seed: u64) -> Result<Vec<LabeledExample>, DatagenError> {
    if n == 0 {
        return Err(DatagenError::InvalidCount);
    }
    let train = res.compositional_templates(TemplatePool::Train);
    let eval = res.compositional_templates(TemplatePool::Eval);
    if train.is_empty() {
        return Err(DatagenError::NoTemplates("compositional train pool".into()));
    }
    if eval.is_empty() {
        return Err(DatagenError::NoTemplates("compositional eval pool".into()));
    }
    (0..n)
        .map(|i| {
            let mut rng = example_rng(seed, 0, i);
            let split = split_of(i, n);
            let (templates, pool) = match split {
                Split::Test => (&eval, EntityPool::Eval),
                _ => (&train, EntityPool::Train),
            };
            make_example(res, templates, pool, &mut rng, format!("comp-{i:06}"), split)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_round() {
        assert_eq!(split_sizes(10), (8, 1, 1));
        assert_eq!(split_sizes(1000), (800, 100, 100));
        assert_eq!(split_sizes(15), (12, 2, 1));
        assert_eq!(split_sizes(1), (1, 0, 0));
        for n in 1..500 {
            let (a, b, c) = split_sizes(n);
            assert_eq!(a + b + c, n);
            assert!((a as f64 - 0.8 * n as f64).abs() <= 0.5);
            assert!((b as f64 - 0.1 * n as f64).abs() <= 0.5 || c == 0);
        }
    }

    #[test]
    fn zero_count_is_an_error() {
        let res = Resources::builtin();
        assert!(matches!(
            generate_single_task(&res, UseCase::Repair, 0, 1),
            Err(DatagenError::InvalidCount)
        ));
        assert!(matches!(generate_compositional(&res, 0, 1), Err(DatagenError::InvalidCount)));
    }
}
