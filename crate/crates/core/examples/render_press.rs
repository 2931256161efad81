//! Renders one noise-free press of a 10 mm sphere and saves it as a PNG.
//!
//! Usage: cargo run --example render_press -- [hardness] [out.png]

use tactile_hardness::mechanics::{
    contact_for_shape, gel_surface, shore00_to_modulus, ContactPair, ContactPose, IndenterShape, Shore00,
};
use tactile_hardness::render::{mean_intensity_change, Renderer};

fn main() {
    let mut args = std::env::args().skip(1);
    let hardness: f64 = args.next().map_or(40.0, |s| s.parse().expect("hardness is a number"));
    let out = args.next().unwrap_or_else(|| "press.png".into());

    let renderer = Renderer::default();
    let spec = &renderer.spec;
    let pair = ContactPair {
        gel: shore00_to_modulus(spec.hardness).unwrap(),
        object: shore00_to_modulus(Shore00::new(hardness).unwrap()).unwrap(),
    };
    let shape = IndenterShape::Sphere { radius_mm: 10.0 };
    let state = contact_for_shape(&shape, &pair, 1.5, spec).unwrap();
    let height = gel_surface(&shape, &state, spec).unwrap();
    let frame = renderer.render(&height, &state, &shape, &ContactPose::default());
    let change = mean_intensity_change(&frame, &renderer.rest_frame()).unwrap();

    image::save_buffer(
        &out,
        &frame.to_rgb8(),
        frame.width as u32,
        frame.height as u32,
        image::ExtendedColorType::Rgb8,
    )
    .expect("png written");
    println!("{out}: {}x{} px, intensity change {change:.4}", frame.width, frame.height);
}
