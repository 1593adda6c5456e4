//! Lebeau–Robbiano time schedule and the constant recursion.

use heisenberg_obs::error::Result;
use heisenberg_obs::lr_machinery::{build_schedule, k_star, run_constant_recursion, RecursionInputs};

fn main() -> Result<()> {
    let s = build_schedule(1.0, 4.0, 0.5)?;
    println!("j0 = {}, K = {:.6}", s.j0, s.k);
    for row in s.table(s.j0 + 6) {
        println!("j = {:>2}  tau = {:.6e}  alpha = {:.6}", row.j, row.tau, row.alpha);
    }
    let inputs = RecursionInputs { c8: 1.0, c9: 1.0, k_star: k_star(0.5), t: 1.0, p: 0.0, rho: 0.5 };
    let st = run_constant_recursion(inputs, 40)?;
    println!("j0 = {}, log sup B~ = {:.4}, log sup A = {:.4}, bounded = {}", st.j0, st.log_sup_btilde, st.log_sup_a, st.bounded);
    for r in st.rows.iter().take(6) {
        println!("{r:?}");
    }
    Ok(())
}
