use super::program::{EditProgram, Substitution, UseCase};
use super::EngineError;

/// Whether `later` must be applied after `earlier`.
///
/// `later` depends on `earlier` when its replacement contains the replaced
/// span of `earlier`. It also has to wait when its replaced span strictly
/// contains the replacement of `earlier`: applying it first would excise
/// the cells `earlier` still needs to move.
pub fn depends_on(later: &Substitution, earlier: &Substitution) -> bool {
    if later.use_case == earlier.use_case {
        return false;
    }
    let replaced_in_replacement = later.replacement.covers(&earlier.replaced);
    let replacement_in_replaced = later.replaced.covers(&earlier.replacement) && later.replaced != earlier.replacement;
    replaced_in_replacement || replacement_in_replaced
}

/// All dependency edges `(prerequisite, dependent)` of a program.
pub fn dependency_edges(program: &EditProgram) -> Vec<(UseCase, UseCase)> {
    let subs: Vec<&Substitution> = program.substitutions().collect();
    let mut edges = Vec::new();
    for a in &subs {
        for b in &subs {
            if depends_on(b, a) {
                edges.push((a.use_case, b.use_case));
            }
        }
    }
    edges
}

/// Topological order of the program's substitutions. Ready substitutions
/// are taken in canonical use-case order.
pub fn build_dependency_order(program: &EditProgram) -> Result<Vec<Substitution>, EngineError> {
    let mut pending: Vec<Substitution> = program.substitutions().copied().collect();
    let mut order = Vec::with_capacity(pending.len());
    while !pending.is_empty() {
        // `pending` stays in canonical order, so the first ready entry wins ties.
        let ready = pending
            .iter()
            .position(|s| !pending.iter().any(|other| depends_on(s, other)));
        match ready {
            Some(i) => order.push(pending.remove(i)),
            None => {
                return Err(EngineError::CyclicDependency(
                    pending.iter().map(|s| s.use_case).collect(),
                ))
            }
        }
    }
    Ok(order)
}
