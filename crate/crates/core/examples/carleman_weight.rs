//! Certified Carleman weight and the estimate on a small random corpus.

use heisenberg_obs::carleman::{build_weight, carleman_check, generate_corpus, CheckOptions};
use heisenberg_obs::error::Result;
use heisenberg_obs::mode_operator::Grid1D;

fn main() -> Result<()> {
    let w = build_weight(-0.5, 0.5)?;
    println!("a' = {}, b' = {}, attempts {}", w.a_prime, w.b_prime, w.attempts);
    println!("{:?}", w.certification);
    for [x, b, b1, b2] in w.export(9) {
        println!("x = {x:+.3}  beta = {b:.5}  beta' = {b1:+.5}  beta'' = {b2:+.5}");
    }
    let corpus = generate_corpus(12, 11, 4, 4, &[0.5, 1.0], Grid1D::new(200)?)?;
    let report = carleman_check(&corpus, &CheckOptions::default())?;
    println!("C1 = {:.4e}, held-out violations {}", report.c1, report.violations);
    Ok(())
}
