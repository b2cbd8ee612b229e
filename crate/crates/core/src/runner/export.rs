//! Field samples for plotting, in the record CSV schema.

use super::{Context, KMS_STRIP_LEVELS};
use crate::calderon::fd::FdBoundary;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::report::Sample;
use crate::wick::{boundary_value_extrapolation, euclidean_strip, Edge};

/// `Lambda^+_m(t1, t2)` on about `per_axis` nodes per axis.
pub fn kernel_samples(cfg: &ScenarioConfig, m: i32, per_axis: usize) -> Result<Vec<Sample>> {
    let ctx = Context::new(cfg, 1.0)?;
    let st = ctx.mode_state(cfg.wavenumber(m), cfg.n_t)?;
    let stride = (st.plus.len() / per_axis.max(2)).max(1);
    let idx: Vec<usize> = (0..st.plus.len()).step_by(stride).collect();
    let mut out = Vec::with_capacity(idx.len() * idx.len());
    for &i in &idx {
        for &j in &idx {
            out.push(Sample { mode: m, param1: st.plus.times[i], param2: st.plus.times[j], value: st.plus.value(i, j) });
        }
    }
    Ok(out)
}

/// The Euclidean strip `F(t, s)` of mode `m` on a 201-row grid, with its two edges
/// extrapolated; about `per_axis` samples in each direction.
pub fn strip_samples(cfg: &ScenarioConfig, m: i32, per_axis: usize) -> Result<Vec<Sample>> {
    if cfg.beta().is_none() || !cfg.family.is_stationary() {
        return Err(Error::config("euclidean.bc", "the strip needs a stationary periodic scenario"));
    }
    let ctx = Context::new(cfg, 1.0)?;
    let k = cfg.wavenumber(m);
    let st = ctx.mode_state(k, cfg.n_t)?;
    let sys = ctx.fd(k, KMS_STRIP_LEVELS[0])?;
    let fd = FdBoundary::new(&sys)?;
    let t_stride = (st.evo.grid.len() / per_axis.max(2)).max(1);
    let t_idx: Vec<usize> = (0..st.evo.grid.len()).step_by(t_stride).collect();
    let mut f = euclidean_strip(&fd, &st.evo, &t_idx)?;
    let rows = f.s.len();
    for (edge, r) in [(Edge::Top, 0), (Edge::Bottom, rows - 1)] {
        let ex = boundary_value_extrapolation(&f, edge)?;
        for q in 0..t_idx.len() {
            f.values[(r, q)] = ex.row[q];
        }
    }
    let s_stride = (rows / per_axis.max(2)).max(1);
    let mut out = Vec::new();
    for r in (0..rows).step_by(s_stride).chain(std::iter::once(rows - 1)).collect::<std::collections::BTreeSet<_>>() {
        for (q, &t) in f.t.iter().enumerate() {
            out.push(Sample { mode: m, param1: t, param2: f.s[r], value: f.values[(r, q)] });
        }
    }
    Ok(out)
}
