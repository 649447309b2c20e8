//! Shared instances for the solver benchmarks.

use infomech::fixtures;
use infomech::mechanisms::{solve_pricing_outcomes, Program};
use infomech::protocol::menu_to_protocol;
use infomech::{interesting_posteriors, Context, Correlation, LinearProgram, ProtocolTree};

/// Named contexts spanning the fixture sizes, smallest first.
pub fn contexts() -> Vec<(&'static str, Context)> {
    vec![
        ("separation", fixtures::separation()),
        ("staircase", fixtures::staircase(3, 0.05, 1e-4)),
        ("iid-gap", fixtures::iid_gap(3)),
        ("type-revealing", fixtures::type_revealing(3)),
    ]
}

fn correlation(ctx: &Context) -> Correlation {
    if ctx.is_independent(1e-12) {
        Correlation::Independent
    } else {
        Correlation::Correlated
    }
}

/// The mechanism program of `ctx` over its interesting posteriors.
pub fn program(ctx: &Context, program: Program) -> LinearProgram {
    let q = interesting_posteriors(ctx, correlation(ctx)).expect("fixture posteriors");
    infomech::mechanisms::build_program(ctx, program, q.points())
}

/// The protocol that sells the optimal per-signal-payment menu of `ctx`.
pub fn menu_protocol(ctx: &Context) -> ProtocolTree {
    let q = interesting_posteriors(ctx, correlation(ctx)).expect("fixture posteriors");
    let menu = solve_pricing_outcomes(ctx, &q, true)
        .expect("fixture menu")
        .menu;
    menu_to_protocol(ctx, &menu).expect("menu protocol")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_build() {
        for (name, ctx) in contexts() {
            let lp = program(&ctx, Program::Outcomes { nonnegative: false });
            assert!(lp.n_vars() > 0, "{name}");
            assert!(menu_protocol(&ctx).len() > 1, "{name}");
        }
    }
}
