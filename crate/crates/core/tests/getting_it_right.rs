mod common;

use common::{getting_it_right, GirSetup};
use zeroquant::model::LinkFunction;

fn check(tau: f64, link: LinkFunction, seed: u64) {
    let rows = getting_it_right(&GirSetup::new(tau, link), 20_000, seed);
    for r in &rows {
        eprintln!(
            "{:>10}  marginal {:+.4}  successive {:+.4}  z {:+.2}",
            r.name, r.marginal, r.successive, r.z
        );
    }
    for r in &rows {
        assert!(r.z.abs() < 4.0, "{} disagrees: z = {:.2}", r.name, r.z);
    }
}

#[test]
fn joint_distribution_logit_low_quantile() {
    check(0.3, LinkFunction::Logit, 11);
}

#[test]
fn joint_distribution_probit_high_quantile() {
    check(0.8, LinkFunction::Probit, 12);
}
