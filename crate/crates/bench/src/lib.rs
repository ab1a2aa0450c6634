//! Benchmark-only crate; see `benches/`.

use wingwrap_core::dynamics::State;
use wingwrap_core::ArticulatedModel;

/// A vehicle 0.1 m short of the pole, moving in at `speed`, wings flat.
pub fn approaching(model: &ArticulatedModel, speed: f64) -> State {
    let mut s = State::rest(model);
    s.q[0] = -0.1 - model.reach();
    s.v[0] = speed;
    s
}
