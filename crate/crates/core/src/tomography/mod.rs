//! Characteristic-function readout and Wigner reconstruction.
//!
//! The pipeline is
//! [`probe_grid`] → [`synthesize_records`] → [`extract_char_fn`] →
//! [`resample_polar`] → [`wigner_from_charfn`], with [`wigner_direct`] and
//! [`wigner_series`] as references that skip the records.

mod charfn;
pub mod io;
mod inversion;
mod probe;
mod records;
mod wigner;

pub use charfn::{char_fn, pe_approx, pe_from_charfn, probe_mu, CharFnEvaluator, PeApprox, LARGE_I_FACTOR};
pub use inversion::{extract_char_fn, CharFnGrid, CharFnSource, MAX_CONDITION};
pub use probe::{probe_grid, IntensityPolicy, ProbeGridSpec, ProbePoint, ProbeSite};
pub use records::{synthesize_records, ProbeRecord, SynthesisMode, DEFAULT_SEED, MAX_PHOTON_DIM};
pub use wigner::{
    char_fn_on_grid, resample_polar, uniform_axis, wigner_direct, wigner_from_charfn, wigner_from_charfn_at, wigner_series,
    MuGrid, WignerGrid, WignerSpec, BOUNDARY_DECAY, GRID_TOL, NORMALIZATION,
};
