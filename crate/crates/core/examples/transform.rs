//! The exponential change of unknown and the nonlinearities it produces.

use quadgrad::nonlinear::{g_delta, k_delta, sign_k, transform_forward, transform_inverse, HModel, Height, PointCoeffs, Shape};

fn main() -> quadgrad::Result<()> {
    let delta = 1.0;
    println!("{:>6} {:>14} {:>14} {:>12}", "u", "w", "back", "g_delta(w)");
    for u in [-3.0, -1.0, -0.1, 0.0, 0.1, 1.0, 3.0] {
        let w = transform_forward(u, delta)?;
        println!("{u:>6} {w:>14.8} {:>14.8} {:>12.6}", transform_inverse(w, delta)?, g_delta(w, delta));
    }

    // The upper extremal shape makes K vanish for t > 0 at delta = gamma.
    let x = PointCoeffs::identity(2);
    let h = HModel::shape(Shape::Sign { level: 1.0 });
    for t in [0.5, 2.0] {
        println!("K(t = {t}) = {:e}", k_delta(&x, t, &[1.0, 0.5], 1.0, &h));
    }
    let k = Height::new(4.0)?;
    println!("sign_4(0.1) = {}, sign_4(0.3) = {}", sign_k(0.1, k), sign_k(0.3, k));
    Ok(())
}
