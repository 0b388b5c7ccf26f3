use offalign_core::data::{oracle_reward, synth_generate, EvalPrompt, TaskConfig};
use offalign_core::eval::{oracle_eval, EvalModel};
use offalign_core::{Checkpoint, CheckpointMeta, ModelConfig, ModelParams};

fn model(name: &str, seed: u64) -> EvalModel {
    EvalModel {
        name: name.into(),
        params: ModelParams::init(&ModelConfig::tiny(), seed).unwrap(),
        condition_score: None,
    }
}

fn prompts(n: usize) -> Vec<EvalPrompt> {
    let cfg = TaskConfig {
        n_eval: n,
        ..TaskConfig::default()
    };
    synth_generate(&cfg, 1, 3).unwrap().eval_prompts
}

#[test]
fn identical_models_tie_on_every_prompt() {
    let a = model("a", 1);
    let b = EvalModel {
        name: "b".into(),
        ..a.clone()
    };
    let report = oracle_eval(&[a, b, model("c", 2)], &prompts(6), 12).unwrap();
    for p in &report.prompts {
        let (ra, rb) = (&p.results[0], &p.results[1]);
        assert_eq!(ra.response, rb.response);
        assert_eq!(ra.rank_score, rb.rank_score);
        assert_eq!(ra.rank, rb.rank);
        assert_eq!(p.results.iter().map(|r| r.rank_score).sum::<f64>(), 6.0);
    }
}

#[test]
fn aggregates_are_prompt_means() {
    let models = [model("x", 4), model("y", 5), model("z", 6)];
    let ps = prompts(8);
    let report = oracle_eval(&models, &ps, 10).unwrap();
    assert_eq!(report.models, ["x", "y", "z"]);
    for (i, m) in models.iter().enumerate() {
        let mut reward = 0.0;
        let mut rank_score = 0.0;
        for (p, pr) in ps.iter().zip(&report.prompts) {
            let r = &pr.results[i];
            assert_eq!(r.model, m.name);
            assert_eq!(r.response, m.respond(&p.instruction, 10).unwrap());
            assert_eq!(r.oracle_reward, oracle_reward(&p.instruction, &r.response).unwrap());
            // score = 1 + #strictly worse + half the ties
            let worse = pr.results.iter().filter(|o| o.oracle_reward < r.oracle_reward).count() as f64;
            let tied = pr.results.iter().filter(|o| o.oracle_reward == r.oracle_reward).count() as f64 - 1.0;
            assert_eq!(r.rank_score, 1.0 + worse + 0.5 * tied);
            reward += r.oracle_reward;
            rank_score += r.rank_score;
        }
        let agg = report.aggregate(&m.name).unwrap();
        assert!((agg.mean_oracle_reward - reward / ps.len() as f64).abs() < 1e-12);
        assert!((agg.mean_rank_score - rank_score / ps.len() as f64).abs() < 1e-12);
    }
    assert!(report.summary().contains("(8 prompts, 3 models)"));
}

#[test]
fn evaluation_is_deterministic() {
    let models = [model("p", 7), model("q", 8)];
    let ps = prompts(4);
    assert_eq!(
        oracle_eval(&models, &ps, 8).unwrap(),
        oracle_eval(&models, &ps, 8).unwrap()
    );
}

#[test]
fn rejects_bad_model_sets() {
    let ps = prompts(2);
    assert!(oracle_eval(&[model("a", 1)], &ps, 8).is_err());
    assert!(oracle_eval(&[model("a", 1), model("a", 2)], &ps, 8).is_err());
    assert!(oracle_eval(&[model("a", 1), model("b", 2)], &[], 8).is_err());
}

#[test]
fn score_conditioning_follows_checkpoint_meta() {
    let params = ModelParams::init(&ModelConfig::tiny(), 1).unwrap();
    let ck = |score_conditioned| Checkpoint::Lm {
        params: params.clone(),
        meta: CheckpointMeta {
            stage: "align".into(),
            method: None,
            score_conditioned,
        },
    };
    assert_eq!(
        EvalModel::from_checkpoint("ca", ck(true), 5.0).unwrap().condition_score,
        Some(5.0)
    );
    assert_eq!(
        EvalModel::from_checkpoint("fa", ck(false), 5.0)
            .unwrap()
            .condition_score,
        None
    );
}
