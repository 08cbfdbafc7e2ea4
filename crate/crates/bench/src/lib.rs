//! Fixtures shared by the benchmarks.

use prune_lab::data::gen_synthetic;
use prune_lab::{Mask, Network, PruneState, ScheduleSpec, SyntheticKind, Tensor2D};

/// The `[2, 64, 64, 2]` spirals network used by the experiments.
pub const DIMS: [usize; 4] = [2, 64, 64, 2];

pub fn network() -> Network {
    Network::init(&DIMS, 7).expect("valid dims")
}

/// One minibatch of spirals points and labels.
pub fn batch(size: usize) -> (Tensor2D, Vec<usize>) {
    let ds = gen_synthetic(SyntheticKind::Spirals, size.max(10), 0.05, 1).expect("valid dataset");
    let rows: Vec<usize> = (0..size).collect();
    let labels = rows.iter().map(|&r| ds.labels[r]).collect();
    (ds.features.gather_rows(&rows), labels)
}

/// Mask at `sparsity` for `net`, computed by global magnitude ranking.
pub fn mask_at(net: &Network, sparsity: f64) -> Mask {
    let mut state = PruneState::new(net, ScheduleSpec::one_shot(0.0, sparsity), 1).expect("valid schedule");
    state.update_mask(net, 0, 1.0).expect("matching shapes");
    state.mask
}
