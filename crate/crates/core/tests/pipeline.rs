use bdt_core::data::{generate_synthetic_stca, make_folds, FoldStrategy, SynthConfig};
use bdt_core::likelihood::log_tree_prior;
use bdt_core::sampler::{run_chains, Phase};
use bdt_core::selection::map_scores;
use bdt_core::*;

fn small_run(seed: u64) -> (Dataset, ChainRun) {
    let data = generate_synthetic_stca(&SynthConfig { pair_count: 15, seed, ..Default::default() }).unwrap();
    let hyper = Hyperparameters { burn_in: 3000, post_burn_in: 1400, seed, ..Default::default() };
    let run = run_chain(&data, &hyper).unwrap();
    (data, run)
}

#[test]
fn collected_trees_are_fitted_and_respect_pmin() {
    let (data, run) = small_run(1);
    assert_eq!(run.ensemble.len(), 200);
    for t in run.ensemble.trees() {
        let refit = t.refit(&data, 15).unwrap();
        assert_eq!(&refit.tree, t);
        assert_eq!(refit.undersized, 0);
        let total: u32 = t.leaves().map(|l| t.counts(l).unwrap().iter().sum::<u32>()).sum();
        assert_eq!(total as usize, data.n_rows());
    }
    assert!(run.diagnostics.leaf_trace().iter().all(|&k| (k as usize) < data.n_rows()));
}

#[test]
fn final_state_matches_recomputation() {
    let (data, run) = small_run(2);
    let st = &run.final_state;
    let ll = likelihood::log_marginal_likelihood(st.tree(), &data, 1.0).unwrap();
    let prior = log_tree_prior(st.tree(), &PriorConfig::for_data(PriorKind::UniformLeaves, &data), &data).unwrap();
    assert!((st.log_lik() - ll).abs() <= 1e-9 * ll.abs().max(1.0));
    assert!((st.log_prior() - prior).abs() <= 1e-9 * prior.abs().max(1.0));
}

#[test]
fn envelope_partitions_rows_for_every_threshold() {
    let (data, run) = small_run(3);
    let mut last = f64::INFINITY;
    for g in [0.5, 0.7, 0.9, 0.99, 1.0] {
        let r = run.ensemble.classify_with_envelope(&data, g).unwrap();
        let c = r.counts.unwrap();
        assert_eq!(c.confident_correct + c.confident_incorrect + c.uncertain, c.rows);
        let sum = c.confident_correct_rate() + c.confident_incorrect_rate() + c.uncertain_rate();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(r.confident_fraction() <= last);
        last = r.confident_fraction();
    }
}

#[test]
fn selections_are_consistent() {
    let (data, run) = small_run(4);
    let ens = &run.ensemble;
    let sc = select_sc(ens, &data, 0.99).unwrap();
    let [s1, s2, s3] = sc.set_sizes.unwrap();
    assert!(s1 >= s2 && s2 >= s3 && s3 >= 1);

    let prior = PriorConfig::for_data(PriorKind::UniformLeaves, &data);
    let map = select_map(ens, &data, &prior).unwrap();
    let scores = map_scores(ens, &data, &prior, Exec::Sequential).unwrap();
    assert!(scores.iter().all(|&s| s <= scores[map.index]));

    let mapw = select_mapw(ens, 0.05).unwrap();
    let groups = selection::mapw_groups(ens, 0.05);
    let total: f64 = groups.iter().map(|g| g.len() as f64 / ens.len() as f64).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(groups.iter().all(|g| g.len() <= groups.iter().find(|g| g.contains(&mapw.index)).unwrap().len()));
}

#[test]
fn independent_chains_do_not_depend_on_policy() {
    let data = generate_synthetic_stca(&SynthConfig { pair_count: 10, ..Default::default() }).unwrap();
    let hyper = Hyperparameters { burn_in: 500, post_burn_in: 140, ..Default::default() };
    let a = run_chains(&data, &hyper, &[5, 6, 7], Exec::Sequential).unwrap();
    let b = run_chains(&data, &hyper, &[5, 6, 7], Exec::Parallel).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.ensemble.trees(), y.ensemble.trees());
        assert_eq!(x.diagnostics.log_lik_trace(), y.diagnostics.log_lik_trace());
    }
}

#[test]
fn fold_training_on_subsets() {
    let data = generate_synthetic_stca(&SynthConfig { pair_count: 10, ..Default::default() }).unwrap();
    let plan = make_folds(data.labels(), 2, FoldStrategy::RepeatedHalves, 0).unwrap();
    let fold = &plan.folds[0];
    let train = data.subset(&fold.train).unwrap();
    let test = data.subset(&fold.test).unwrap();
    let hyper = Hyperparameters { burn_in: 500, post_burn_in: 140, ..Default::default() };
    let run = run_chain(&train, &hyper).unwrap();
    let r = run.ensemble.classify_with_envelope(&test, 0.99).unwrap();
    assert_eq!(r.outcomes.len(), test.n_rows());
    assert!(run.diagnostics.acceptance_rate(Phase::PostBurnIn) <= 1.0);
}

#[test]
fn diagnostics_csv_layout() {
    let (_, run) = small_run(5);
    let mut buf = Vec::new();
    run.diagnostics.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("phase,iteration,loglik,leaves,move,accepted"));
    assert_eq!(lines.count(), 4400);
}
