use std::collections::BTreeSet;

use depsim::corpus::{idf_table, smoothed_idf, IdfScope};
use depsim::recommend::{jaccard_distance, recommend, ModelKind, Neighbors, QuerySource, ScoringParams};
use depsim::{normalize_name, parse_requirements, Corpus, LibraryName, ProjectSnapshot};
use proptest::prelude::*;

fn name() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9]{0,5}([-_.][A-Za-z0-9]{1,4}){0,2}"
}

fn line() -> impl Strategy<Value = String> {
    prop_oneof![
        name(),
        (name(), "[0-9]\\.[0-9]{1,2}").prop_map(|(n, v)| format!("{n}=={v}")),
        (name(), "[0-9]").prop_map(|(n, v)| format!("{n}>={v} ; python_version < \"3.8\"")),
        (name(), name()).prop_map(|(n, e)| format!("{n}[{e}] # note")),
        Just(String::new()),
        Just("   ".to_string()),
        "# [a-z ]{0,12}".prop_map(String::from),
        Just("-r other.txt".to_string()),
        Just("--index-url https://example.org/simple".to_string()),
    ]
}

fn corpus_strategy() -> impl Strategy<Value = Corpus> {
    prop::collection::btree_map(
        (0..15u8, 2019..2021i32),
        prop::collection::btree_set(0..25u8, 1..7),
        3..30,
    )
    .prop_map(|m| {
        let snaps = m
            .into_iter()
            .map(|((r, y), deps)| {
                ProjectSnapshot::new(
                    format!("o{r}/p"),
                    y,
                    deps.into_iter().map(|d| format!("lib{d}").parse::<LibraryName>().unwrap()),
                )
                .unwrap()
            })
            .collect();
        Corpus::new(snaps).unwrap()
    })
}

proptest! {
    #[test]
    fn normalization_is_idempotent(raw in name()) {
        let once = normalize_name(&raw).unwrap();
        prop_assert_eq!(normalize_name(once.as_str()).unwrap(), once);
    }

    #[test]
    fn parsing_ignores_line_order(lines in prop::collection::vec(line(), 0..20), seed in any::<u64>()) {
        let mut shuffled = lines.clone();
        let n = shuffled.len();
        if n > 1 {
            for i in 0..n {
                shuffled.swap(i, (seed as usize).wrapping_add(i * 7) % n);
            }
        }
        let a = parse_requirements(&lines.join("\n"));
        let b = parse_requirements(&shuffled.join("\r\n"));
        prop_assert_eq!(a.names, b.names);
    }

    #[test]
    fn every_line_is_accounted_for(lines in prop::collection::vec(line(), 1..20)) {
        let text = lines.join("\n");
        let report = parse_requirements(&text);
        prop_assert_eq!(report.logical_lines(), text.lines().count());
        prop_assert_eq!(report.is_skippable(), report.names.is_empty());
    }

    #[test]
    fn idf_decreases_with_popularity(n in 1usize..10_000, df in 0usize..10_000) {
        prop_assume!(df < n);
        prop_assert!(smoothed_idf(n, df) > smoothed_idf(n, df + 1));
        prop_assert!(smoothed_idf(n, df + 1) >= 1.0);
    }

    #[test]
    fn jaccard_is_a_bounded_symmetric_distance(
        a in prop::collection::btree_set(0..20u8, 0..8),
        b in prop::collection::btree_set(0..20u8, 1..8),
    ) {
        let d = jaccard_distance(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, jaccard_distance(&b, &a).unwrap());
        prop_assert_eq!(jaccard_distance(&b, &b).unwrap(), 0.0);
    }

    #[test]
    fn recommendations_are_new_and_nonnegative(
        c in corpus_strategy(),
        alpha in -3.0f64..3.0,
        beta in 0.0f64..3.0,
        k in 1usize..10,
        pick in any::<prop::sample::Index>(),
    ) {
        let q = &c.snapshots()[pick.index(c.len())];
        let p = ScoringParams { alpha, beta, k_neighbors: Neighbors::Top(k), model_kind: ModelKind::Jaccard, top_n: 50 };
        if let Ok(out) = recommend(&QuerySource::Snapshot(q.key()), None, &c, &p, None) {
            for r in &out.recommendations {
                prop_assert!(!q.deps.contains(&r.library));
                prop_assert!(r.score >= 0.0);
                prop_assert!(r.supporting_neighbors >= 1);
            }
        }
    }

    #[test]
    fn idf_scope_never_sees_other_years(c in corpus_strategy()) {
        let t = idf_table(&c, IdfScope::Year(2019));
        if let Ok(t) = t {
            let slice: BTreeSet<&LibraryName> = c.slice(2019).iter().flat_map(|s| s.deps.iter()).collect();
            for lib in c.vocabulary() {
                let want = c.slice(2019).iter().filter(|s| s.deps.contains(&lib)).count();
                prop_assert_eq!(t.df(lib.as_str()), want);
                prop_assert_eq!(want > 0, slice.contains(&lib));
            }
        }
    }
}
