mod common;

use common::*;
use proptest::prelude::*;

use pranos::model::{deployment_cost, validate_deployment};
use pranos::planner::{audit_flow, plan, PlannerOptions};
use pranos::reference::{solve_exact, solve_greedy_baseline, ExactOptions, GreedyConfig};
use pranos::rounding::{round_all, rounding_bound};

const TINY: Shape = Shape { dcs: (2, 4), max_links: 6, max_users: 6, capacity: 6.0 };

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rejections_and_costs_are_sandwiched(seed in any::<u64>(), order in any::<u64>()) {
        let inst = random_instance(seed, TINY);
        let users = shuffled(&inst.users, order);
        let flow = plan(&inst.net, &inst.apps, users.aggregate(), &inst.tables, &PlannerOptions::default()).unwrap();
        prop_assert!(audit_flow(&inst.net, &inst.apps, users.aggregate(), &inst.tables, &flow, 1e-6).ok());

        let rounded = round_all(&users, &flow, &inst.net, &inst.apps).unwrap();
        let exact = solve_exact(&inst.net, &inst.apps, users.users(), &inst.tables, &ExactOptions::default()).unwrap();
        prop_assume!(exact.proven);

        let psi = deployment_cost(&inst.net, &inst.apps, users.users(), &rounded.deployment);
        prop_assert!(le_rel(flow.cost, exact.objective, 1e-6), "{} > {}", flow.cost, exact.objective);
        prop_assert!(le_rel(exact.objective, psi, 1e-6), "{} > {psi}", exact.objective);

        let (ours, best) = (rounded.deployment.num_rejected(), exact.deployment.num_rejected());
        let bound = rounding_bound(&inst.net, &inst.apps);
        prop_assert!(best <= ours && ours <= best + bound, "exact {best}, rounded {ours}, bound {bound}");
    }

    #[test]
    fn every_method_emits_feasible_deployments(seed in any::<u64>(), order in any::<u64>()) {
        let inst = random_instance(seed, MEDIUM);
        let users = shuffled(&inst.users, order);
        let flow = plan(&inst.net, &inst.apps, users.aggregate(), &inst.tables, &PlannerOptions::default()).unwrap();
        let rounded = round_all(&users, &flow, &inst.net, &inst.apps).unwrap();
        let greedy = solve_greedy_baseline(&inst.net, &inst.apps, users.users(), &inst.tables, &GreedyConfig::default()).unwrap();
        for dep in [&rounded.deployment, &greedy] {
            let report = validate_deployment(&inst.net, &inst.apps, users.users(), dep).unwrap();
            prop_assert!(report.feasible(), "{:?}", report.violations);
        }
    }
}
