//! Critical parameters for a hand-written set of constants.

use quadgrad::constants::{CriticalReport, Exponents, ProblemConstants};

fn main() -> quadgrad::Result<()> {
    let c = ProblemConstants {
        n: 3,
        alpha: 1.0,
        gamma: 0.5,
        c0: 0.0,
        q: 1.8,
        norm_f_n2: 0.05,
        norm_f_hm1: 0.02,
        norm_a0_n2: 0.1,
        norm_a0_q: 0.1,
        c_n: 0.5,
        exponents: Exponents::for_dimension(3)?,
    };
    let r = CriticalReport::build(&c, 1e-12, &[0.6, 1.0])?;
    println!("theta = {}, C(theta) = {}, G = {}", r.theta, r.c_theta, r.g);
    println!("A1 margin {:e}, A3 margin {:e}", r.smallness_a1.margin, r.smallness_a3.margin);
    println!("delta_1 = {}", r.delta1);
    match (r.delta0, r.z_delta0) {
        (Some(d), Some(z)) => println!("delta_0 = {d}, Z = {z}"),
        _ => println!("no critical parameter: smallness fails"),
    }
    for y in &r.y_zeros {
        println!("delta = {}: Y- = {}, Y+ = {}", y.delta, y.y_minus, y.y_plus);
    }
    Ok(())
}
