//! Recover a planted Dirichlet character and a planted x^{-it₀} from
//! perturbed copies.
//!
//! cargo run --release --example straighten

use chowla_lab::functions::UnitGroup;
use chowla_lab::straighten::{
    snap_to_archimedean, snap_to_dirichlet, ArchimedeanSettings, PositiveRealQuasimorphism, UnitGroupQuasimorphism,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let eps = 0.05;
    let group = UnitGroup::new(36).expect("group");
    for index in 0..group.character_count() {
        let chi = group.character(index).expect("character");
        let psi = UnitGroupQuasimorphism::planted(&chi, eps, &mut rng);
        let snap = snap_to_dirichlet(&psi, eps).expect("snap");
        println!(
            "q = 36, planted {index:>2}, recovered {:>2}, sup error {:.4}",
            snap.chi.index(),
            snap.sup_error
        );
    }
    for (i, t0) in [-4.2, -0.3, 0.0, 2.5].into_iter().enumerate() {
        let alpha = PositiveRealQuasimorphism::planted(t0, 0.03, i as u64);
        let snap = snap_to_archimedean(&alpha, &ArchimedeanSettings::default()).expect("snap");
        println!("t0 = {t0:>5}, recovered t = {:.5}, sup error {:.4}", snap.t, snap.sup_error);
    }
}
