//! Contexts whose mechanism programs once broke the simplex:
//! - a spurious ray in phase one after tiny Bland pivots
//! - a singular basis after dropping a redundant row that was not the
//!   artificial's own
//! - a huge step through a column whose only positive entries were roundoff
//! - a singular basis after pivoting an artificial out on a roundoff entry

use infomech::mechanisms::{build_program, Program};
use infomech::{interesting_posteriors, lp, Context, ContextData, Correlation};

fn contexts() -> Vec<Context> {
    include_str!("data/degenerate_duals.jsonl")
        .lines()
        .map(|l| Context::try_from(serde_json::from_str::<ContextData>(l).unwrap()).unwrap())
        .collect()
}

#[test]
fn primal_and_dual_agree() {
    for (k, ctx) in contexts().iter().enumerate() {
        let q = interesting_posteriors(ctx, Correlation::Correlated).unwrap();
        for program in [
            Program::Mappings,
            Program::Outcomes { nonnegative: true },
            Program::Outcomes { nonnegative: false },
        ] {
            let prog = build_program(ctx, program, q.points());
            let p = lp::solve(&prog).unwrap();
            let d = lp::solve(&lp::build_dual(&prog)).unwrap();
            assert_eq!(p.status, lp::Status::Optimal, "{k} {program:?}");
            assert_eq!(d.status, lp::Status::Optimal, "{k} {program:?}");
            let gap = (p.objective - d.objective).abs();
            assert!(
                gap <= 1e-7 * (1.0 + p.objective.abs()),
                "{k} {program:?} gap {gap}"
            );
        }
    }
}
