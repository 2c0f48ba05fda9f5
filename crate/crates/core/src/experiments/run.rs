use ndarray::{Array2, ArrayView2, Axis};

use super::plan::{ExperimentPlan, PrivacyModel};
use crate::data::{Dataset, DatasetSplit, Task};
use crate::error::{Error, Result};
use crate::mechanisms::{MdpSwapper, Vocabulary};
use crate::metrics::{macro_f1, majority_class, AttackerScore, MetricsReport, TaskScore};
use crate::neural::{
    ldp_perturb_rows, train_cape, train_cgt, train_joint, Attacker, AttackerTopology, HeadSpec, JointData, JointMode,
    Labeled, Network, TrainConfig, DEFAULT_TRUNK,
};
use crate::rng::{derive_seed, RandomSource};

/// Embedding matrix of `dataset`, one row per record.
pub fn embedding_matrix(dataset: &Dataset) -> Array2<f64> {
    let (n, m) = (dataset.len(), dataset.dim());
    let mut x = Array2::zeros((n, m));
    for (mut row, r) in x.rows_mut().into_iter().zip(dataset.records()) {
        row.assign(&ndarray::ArrayView1::from(r.embedding.as_slice()));
    }
    x
}

/// Replaces every record's tokens by their noisy nearest-word swaps and
/// re-embeds the result as the mean of the swapped word vectors. Record `i`
/// draws from `rng.derive_indexed("record", i)`.
pub fn mdp_embeddings(dataset: &Dataset, vocab: &Vocabulary, epsilon: f64, rng: &RandomSource) -> Result<Array2<f64>> {
    mdp_swap(dataset, vocab, epsilon, rng).map(|(x, _)| x)
}

/// [`mdp_embeddings`] plus the swapped token sequences.
pub(crate) fn mdp_swap(
    dataset: &Dataset,
    vocab: &Vocabulary,
    epsilon: f64,
    rng: &RandomSource,
) -> Result<(Array2<f64>, Vec<Vec<String>>)> {
    let swapper = MdpSwapper::new(vocab, epsilon)?;
    let mut x = Array2::zeros((dataset.len(), vocab.dim()));
    let mut all_tokens = Vec::with_capacity(dataset.len());
    for (i, (mut row, r)) in x.rows_mut().into_iter().zip(dataset.records()).enumerate() {
        let tokens = r.tokens.as_ref().ok_or_else(|| Error::MissingTokens { id: r.id.clone() })?;
        let swapped = swapper.privatize(tokens, &mut rng.derive_indexed("record", i as u64))?;
        let v = vocab
            .mean_vector(&swapped.tokens)
            .ok_or_else(|| Error::param("tokens", format!("record `{}` has no in-vocabulary token", r.id)))?;
        row.assign(&ndarray::ArrayView1::from(&v[..]));
        all_tokens.push(swapped.tokens);
    }
    Ok((x, all_tokens))
}

/// Inputs and labels of one split.
struct Part {
    x: Array2<f64>,
    labels: Vec<Vec<usize>>,
}

impl Part {
    fn new(x: &Array2<f64>, idx: &[usize], all_labels: &[Vec<usize>]) -> Self {
        Self {
            x: x.select(Axis(0), idx),
            labels: all_labels.iter().map(|l| idx.iter().map(|&i| l[i]).collect()).collect(),
        }
    }

    /// Base labels come first, the adversary target second.
    fn joint<'a>(&'a self, base_head: &'a str, adversary_head: &'a str) -> JointData<'a> {
        JointData {
            x: self.x.view(),
            base_head,
            base_labels: &self.labels[0],
            adversary_head,
            private_labels: &self.labels[1],
        }
    }
}

/// A model trained under one plan and seed, reduced to what the attackers
/// need: frozen representations of each split plus the scores of the heads
/// trained alongside it.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub seed: u64,
    pub split: DatasetSplit,
    pub base: TaskScore,
    /// Test score of the adversary head co-trained on `plan.target`.
    pub co_trained: TaskScore,
    pub representations: [Array2<f64>; 3],
    /// Labels per split, indexed like `tasks`.
    labels: [Vec<Vec<usize>>; 3],
    tasks: Vec<Task>,
    classes: Vec<usize>,
    train_cfg: TrainConfig,
}

impl TrainedModel {
    fn task_index(&self, task: Task) -> usize {
        self.tasks.iter().position(|&t| t == task).expect("task registered")
    }

    /// Fresh attacker for `attribute` fitted on the frozen training
    /// representation, early-stopped on validation, scored on test.
    pub fn attack(&self, attribute: Task, topology: AttackerTopology) -> Result<(TaskScore, f64)> {
        let k = self.task_index(attribute);
        let classes = self.classes[k];
        let [train, val, test] = &self.representations;
        let rng = RandomSource::new(self.seed).derive(&format!("attacker/{}", attribute.name()));
        let attacker = Attacker::fit(
            Labeled {
                x: train.view(),
                labels: &self.labels[0][k],
            },
            (val.nrows() > 0).then(|| Labeled {
                x: val.view(),
                labels: &self.labels[1][k],
            }),
            classes,
            topology,
            &self.train_cfg,
            &rng,
        )?;
        let predictions = attacker.predict(test.view())?;
        let score = TaskScore::score(&predictions, &self.labels[2][k], classes)?;
        let majority = majority_class(&self.labels[0][k], classes);
        let majority_f1 = macro_f1(&vec![majority; predictions.len()], &self.labels[2][k], classes)?;
        Ok((score, majority_f1))
    }

    pub fn report(&self, plan: &ExperimentPlan, topology: AttackerTopology) -> Result<MetricsReport> {
        let mut attackers = Vec::with_capacity(plan.attributes.len());
        for &attribute in &plan.attributes {
            let (fresh, majority_f1) = self
                .attack(attribute, topology)
                .map_err(|e| e.context(format!("attacker for {attribute}")))?;
            attackers.push(AttackerScore {
                attribute: attribute.name().to_string(),
                fresh,
                co_trained: (attribute == plan.target).then_some(self.co_trained),
                majority_f1,
            });
        }
        Ok(MetricsReport::new(self.base, attackers))
    }
}

fn score_head(net: &Network, x: ArrayView2<f64>, head: &str, labels: &[usize]) -> Result<TaskScore> {
    let predictions = net.predict(x, head)?;
    TaskScore::score(&predictions, labels, net.classes(head)?)
}

/// Trains the plan's model for one seed.
pub fn train_model(plan: &ExperimentPlan, dataset: &Dataset, vocab: Option<&Vocabulary>, seed: u64) -> Result<TrainedModel> {
    let root = RandomSource::new(seed);
    let split = dataset.split(&mut root.derive("split"), plan.fractions)?;

    let mut tasks = vec![plan.base_task, plan.target];
    for &a in &plan.attributes {
        if !tasks.contains(&a) {
            tasks.push(a);
        }
    }
    let classes: Vec<usize> = tasks.iter().map(|&t| dataset.classes(t)).collect();
    let all_labels: Vec<Vec<usize>> = tasks.iter().map(|&t| dataset.labels(t)).collect();

    // Record-level mechanisms privatize every record once, before splitting.
    let x = match plan.model {
        PrivacyModel::Ldp => ldp_perturb_rows(embedding_matrix(dataset).view(), &plan.privacy, &root.derive("ldp"))?,
        PrivacyModel::Mdp => {
            let vocab = vocab.ok_or_else(|| Error::param("vocabulary", "the mdp model needs a vocabulary"))?;
            mdp_embeddings(dataset, vocab, plan.privacy.epsilon, &root.derive("mdp"))?
        }
        _ => embedding_matrix(dataset),
    };
    let mut train = Part::new(&x, &split.train, &all_labels);
    let mut val = Part::new(&x, &split.validation, &all_labels);
    let mut test = Part::new(&x, &split.test, &all_labels);
    if train.x.nrows() == 0 || test.x.nrows() == 0 {
        return Err(Error::Empty("train or test split is empty"));
    }

    let cfg = TrainConfig {
        seed: derive_seed(seed, "train"),
        ..plan.train
    };
    let (base_head, target_head) = (plan.base_task.name(), plan.target.name());
    let heads = [
        HeadSpec::standard(base_head, classes[0]),
        HeadSpec::standard(target_head, classes[1]),
    ];

    let mut net = Network::new(dataset.dim(), &DEFAULT_TRUNK, &heads, &mut root.derive("network"))?;
    let co_net: Network;
    match plan.model {
        PrivacyModel::Baseline | PrivacyModel::Ldp | PrivacyModel::Mdp | PrivacyModel::Gr => {
            let mode = if plan.model == PrivacyModel::Gr {
                JointMode::GradientReversal
            } else {
                JointMode::Baseline
            };
            train_joint(&mut net, train.joint(base_head, target_head), &cfg, mode)?;
            co_net = net.clone();
        }
        PrivacyModel::Cape => {
            let (_, noisy_train) = train_cape(&mut net, train.joint(base_head, target_head), &cfg, &plan.privacy)?;
            // Attackers see what the deployed model sees: fresh noise on
            // validation and test inputs.
            train.x = noisy_train;
            val.x = ldp_perturb_rows(val.x.view(), &plan.privacy, &root.derive("cape/validation-noise"))?;
            test.x = ldp_perturb_rows(test.x.view(), &plan.privacy, &root.derive("cape/test-noise"))?;
            co_net = net.clone();
        }
        PrivacyModel::Cgt => {
            let mut net_b = Network::new(
                dataset.dim(),
                &DEFAULT_TRUNK,
                &heads[..1],
                &mut root.derive("network/base"),
            )?;
            let mut net_p = Network::new(
                dataset.dim(),
                &DEFAULT_TRUNK,
                &heads[1..],
                &mut root.derive("network/private"),
            )?;
            train_cgt(&mut net_b, &mut net_p, train.joint(base_head, target_head), &cfg)?;
            net = net_b;
            co_net = net_p;
        }
    }

    let base = score_head(&net, test.x.view(), base_head, &test.labels[0])?;
    let co_trained = score_head(&co_net, test.x.view(), target_head, &test.labels[1])?;
    let representations = [
        net.representation(train.x.view())?,
        net.representation(val.x.view())?,
        net.representation(test.x.view())?,
    ];
    Ok(TrainedModel {
        seed,
        split,
        base,
        co_trained,
        representations,
        labels: [train.labels, val.labels, test.labels],
        tasks,
        classes,
        train_cfg: cfg,
    })
}

/// One seed: train, then attack every attribute with a fresh attacker.
pub fn run_seed(plan: &ExperimentPlan, dataset: &Dataset, vocab: Option<&Vocabulary>, seed: u64) -> Result<MetricsReport> {
    train_model(plan, dataset, vocab, seed)?.report(plan, plan.attacker)
}

/// Runs the plan for every seed and averages the reports.
pub fn run_experiment(plan: &ExperimentPlan, dataset: &Dataset, vocab: Option<&Vocabulary>) -> Result<MetricsReport> {
    plan.validate(dataset, vocab)?;
    let reports = run_seeds(plan, dataset, vocab)?;
    Ok(MetricsReport::mean(&reports))
}

/// Per-seed reports, in seed order.
pub fn run_seeds(plan: &ExperimentPlan, dataset: &Dataset, vocab: Option<&Vocabulary>) -> Result<Vec<MetricsReport>> {
    plan.validate(dataset, vocab)?;
    plan.seeds
        .iter()
        .map(|&seed| {
            run_seed(plan, dataset, vocab, seed).map_err(|e| e.context(format!("model {} seed {seed}", plan.model)))
        })
        .collect()
}
