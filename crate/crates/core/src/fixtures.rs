//! Small reference chains used by tests, examples and the CLI `list` output.

use crate::model::{self, CtmcModel};

/// Two states with escape rates `(c0, c1)`; every jump swaps the state.
pub fn two_state(c0: f64, c1: f64) -> CtmcModel {
    CtmcModel::from_rows(&[c0, c1], &[&[0.0, 1.0], &[1.0, 0.0]]).expect("valid two-state chain")
}

/// Three-state ring with unit escape rates, stepping forward with
/// probability `q` and backward with `1 - q`.
pub fn biased_cycle(q: f64) -> CtmcModel {
    let b = 1.0 - q;
    CtmcModel::from_rows(
        &[1.0, 1.0, 1.0],
        &[&[0.0, q, b], &[b, 0.0, q], &[q, b, 0.0]],
    )
    .expect("valid cycle")
}

/// The two-state pair `c = (1, 2)` against `c~ = (2, 1)`, relative entropy 1/3.
pub fn standard_pair() -> (CtmcModel, CtmcModel) {
    (two_state(1.0, 2.0), two_state(2.0, 1.0))
}

/// The `q = 0.9` ring against its own time reversal.
pub fn cycle_pair() -> (CtmcModel, CtmcModel) {
    let x = biased_cycle(0.9);
    let y = model::reversed(&x).expect("cycle is irreducible");
    (x, y)
}
