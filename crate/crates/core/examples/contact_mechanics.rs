//! Hardness to modulus, and what a 10 mm sphere does to the gel at 1 mm.

use tactile_hardness::mechanics::{contact_for_shape, shore00_to_modulus, ContactPair, GelSpec, IndenterShape, Shore00};

fn main() {
    let spec = GelSpec::default();
    let gel = shore00_to_modulus(spec.hardness).expect("gel hardness is valid");
    let shape = IndenterShape::Sphere { radius_mm: 10.0 };
    println!("shore00   E (kPa)   gel_share   force (N)   gel depth (mm)");
    for h in [8.0, 20.0, 40.0, 60.0, 87.0] {
        let object = shore00_to_modulus(Shore00::new(h).unwrap()).unwrap();
        let pair = ContactPair { gel, object };
        let state = contact_for_shape(&shape, &pair, 1.0, &spec).unwrap();
        println!(
            "{h:7.1} {:9.1} {:11.3} {:11.3} {:16.3}",
            object.youngs_modulus_pa / 1e3,
            pair.gel_share(),
            state.force_n,
            state.gel_depth_mm()
        );
    }
}
