mod common;

use affinelab::counting::{count_n, CountQuery};
use common::{naive_count, oracle_instance, settings};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn enumeration_matches_naive_scan(seed in 0u64..1_000_000, index in 0u64..1000, workers in 1usize..4) {
        let inst = oracle_instance(seed, index);
        let st = settings(workers);
        let q = CountQuery::new(inst.matrix(), inst.q_box, inst.delta_scalar(), inst.theta_scalars()).unwrap();
        let r = count_n(&q, &st, false).unwrap();
        prop_assert_eq!((r.count_certain, r.count_ambiguous), naive_count(&inst, st.guard_bits));
    }
}
