//! Workload fixtures shared by the benchmarks.

use std::sync::Arc;

use lilfield::field::{render_sample, FieldModel, FieldSample};
use lilfield::innovations::{sample_atoms, InnovationModel, MarginalLaw, Realization};
use lilfield::lattice::{LatticeIndex, Window};
use lilfield::Decomposition;
use lilfield::Variant;

pub fn atom_model(d: usize) -> Arc<FieldModel> {
    Arc::new(FieldModel::iid_orthomartingale(d, MarginalLaw::Rademacher).expect("valid model"))
}

/// A causal linear field with a few lags in each axis.
pub fn linear_model(d: usize) -> Arc<FieldModel> {
    let coefs =
        (0..4i64).map(|k| (LatticeIndex::new((0..d as i64).map(|q| (k + q) % 3).collect()), 1.0 / (k + 1) as f64));
    Arc::new(
        FieldModel::causal_linear(d, InnovationModel::iid(MarginalLaw::Rademacher).expect("valid"), coefs)
            .expect("valid model"),
    )
}

pub fn sample(model: &Arc<FieldModel>, sizes: Vec<usize>, seed: u64) -> FieldSample {
    render_sample(model, &Window::new(sizes).expect("window"), seed).expect("render")
}

pub fn decomposition_fixture(d: usize, n: u32) -> (Decomposition, Realization) {
    let model = linear_model(d);
    let dec = Decomposition::new(Arc::clone(&model), &vec![n; d], Variant::Telescoping).expect("decomposition");
    let atoms = sample_atoms(model.innovation(), &dec.required_region(), 1).expect("atoms");
    (dec, atoms)
}
