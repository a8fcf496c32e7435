use active_eval::allocate::{allocate, AllocRule, DEFAULT_DELTA};
use active_eval::estimate::sample_without_replacement;
use active_eval::estimate::{ht_estimate, ht_estimate_weighted, SampleDraw, StreamAddress};
use active_eval::stratify::adaptive_se_stratify;
use active_eval::{LabeledPool, Pool, PoolInstance};

/// Every `m`-subset of `items`, in lexicographic order.
fn subsets(items: &[usize], m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        for mut rest in subsets(&items[i + 1..], m - 1) {
            rest.insert(0, x);
            out.push(rest);
        }
    }
    out
}

/// Six instances: four with unanimous answers, two split.
fn six() -> LabeledPool {
    let answers = [
        ["A", "A", "A"],
        ["B", "B", "B"],
        ["A", "A", "A"],
        ["C", "B", "C"],
        ["C", "C", "C"],
        ["A", "B", "C"],
    ];
    let instances = answers
        .iter()
        .enumerate()
        .map(|(i, a)| {
            PoolInstance::new(format!("i{i}"), a.iter().map(|s| s.to_string()).collect()).unwrap()
        })
        .collect();
    LabeledPool::new(
        Pool::new(instances).unwrap(),
        vec![0.0, 1.0, 0.25, 1.0, 0.5, 0.0],
    )
    .unwrap()
}

#[test]
fn exhaustive_enumeration_matches_pool_risk() {
    let lp = six();
    let st = adaptive_se_stratify(&lp.pool.se_values(), 2).unwrap();
    assert_eq!(st.sizes(), &[4, 2]);
    let plan = allocate(
        AllocRule::Equal,
        &st,
        &lp.pool.sc_values(),
        None,
        DEFAULT_DELTA,
        3,
    )
    .unwrap();
    assert_eq!(plan.counts(), &[2, 1]);

    let members = st.members();
    let mut sum = 0.0;
    let mut sum_w = 0.0;
    let mut draws = 0;
    for s0 in subsets(&members[0], 2) {
        for s1 in subsets(&members[1], 1) {
            let draw = SampleDraw::new(vec![s0.clone(), s1]);
            sum += ht_estimate(&draw, &plan, st.sizes(), &mut lp.oracle())
                .unwrap()
                .value;
            sum_w += ht_estimate_weighted(&draw, &plan, st.sizes(), &mut lp.oracle())
                .unwrap()
                .value;
            draws += 1;
        }
    }
    assert_eq!(draws, 12);
    assert!((sum / 12.0 - lp.risk()).abs() < 1e-12);
    assert!((sum_w / 12.0 - lp.risk()).abs() < 1e-12);
}

#[test]
fn every_plan_is_unbiased_on_the_small_pool() {
    let lp = six();
    let st = adaptive_se_stratify(&lp.pool.se_values(), 2).unwrap();
    let members = st.members();
    for rule in AllocRule::ALL {
        for m in 2..=6 {
            let plan = allocate(
                rule,
                &st,
                &lp.pool.sc_values(),
                Some(lp.losses()),
                DEFAULT_DELTA,
                m,
            )
            .unwrap();
            let (a, b) = (plan.counts()[0], plan.counts()[1]);
            let (mut sum, mut count) = (0.0, 0usize);
            for s0 in subsets(&members[0], a) {
                for s1 in subsets(&members[1], b) {
                    let draw = SampleDraw::new(vec![s0.clone(), s1]);
                    sum += ht_estimate(&draw, &plan, st.sizes(), &mut lp.oracle())
                        .unwrap()
                        .value;
                    count += 1;
                }
            }
            assert!(
                (sum / count as f64 - lp.risk()).abs() < 1e-12,
                "{rule} M={m}"
            );
        }
    }
}

#[test]
fn inclusion_frequencies_match_design() {
    // Every member of a stratum is included with probability m_h / N_h.
    let ids: Vec<usize> = (0..10).collect();
    let (m, trials) = (3usize, 20_000u32);
    let mut hits = [0u32; 10];
    for t in 0..trials {
        let mut rng = StreamAddress::new(77, t, 0).rng();
        for i in sample_without_replacement(&ids, m, &mut rng).unwrap() {
            hits[i] += 1;
        }
    }
    let p = m as f64 / ids.len() as f64;
    let sd = (trials as f64 * p * (1.0 - p)).sqrt();
    for (i, &h) in hits.iter().enumerate() {
        let z = (h as f64 - trials as f64 * p) / sd;
        assert!(z.abs() < 4.0, "item {i}: {h} hits, z = {z:.2}");
    }
}
