use multistop_core::closed_form::*;
use multistop_core::intensity::IntensityModel;
use std::time::Instant;

fn main() {
    let class = IntensityModel::gumbel(0.0, 0.0).unwrap().class.unwrap();
    for m in 1..=1 {
        let t0 = Instant::now();
        let sol = build_case(&class, m, CfSpec::default()).unwrap();
        println!("m={m}: {:?}  roots={:?}", t0.elapsed(), sol.roots());
    }
    let t0 = Instant::now();
    let sol = build_case(&class, 2, CfSpec::default()).unwrap();
    println!("build m=2 again: {:?}", t0.elapsed());
    let t0 = Instant::now();
    for &x in &[0.05, 0.3, 1.0, 3.0, 10.0] {
        let _ = sol.phi(1, x).unwrap();
    }
    println!("5 phi(1) evals: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let mut s = 0.0;
    for i in 0..1000 {
        s += sol.eval_u(2, 0.3, multistop_core::types::Guarantee::Finite(-1.0 + 0.001 * i as f64)).unwrap();
    }
    println!("1000 eval_u: {:?} ({s:.3})", t0.elapsed());
}
