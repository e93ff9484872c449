use frog::data::{generate_synthetic, make_split, ForgetMode, SyntheticSpec};
use frog::trainer::{evaluate_run, run_method, train_original, HyperParams, Method};
use std::collections::{HashMap, HashSet};

fn main() {
    let closure: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().unwrap())
        .unwrap_or(0.6);
    let mut spec = SyntheticSpec::basic("probe", 250, 16, 1.0, 0.8, 1000, 7);
    spec.latent = 0.9;
    spec.closure = closure;
    let bundle = generate_synthetic(&spec).unwrap();
    let mut hp = HyperParams::default();
    hp.epochs = 300;
    hp.weights.beta = 0.05;
    hp.fairness_temp = 4.0;

    for seed in 0..2u64 {
        let mut split =
            make_split(&bundle.graph, 0.05, &ForgetMode::NearTest { hops: 3 }, seed).unwrap();
        split.forget.sort_unstable();
        let model = train_original(&bundle.graph, &split, &hp, seed).unwrap();
        let out =
            run_method(&bundle.graph, &split, &model.encoder, Method::GnnDelete, &hp, seed)
                .unwrap();
        let ev = evaluate_run(
            &bundle.graph,
            &split,
            &model.encoder,
            &out,
            bundle.node_labels.as_deref(),
            seed,
        )
        .unwrap();
        println!(
            "seed {seed} gnndelete          au {:.2} kg {:.2}",
            ev.auroc_test, ev.knowledge_gap
        );

        // Wedge oracle: for every forget pair (i, j), count retain edges that
        // sit on a 2-path i-k-j. Prune the highest-count edges first, up to
        // half the forget budget, and re-evaluate with the same operator.
        let mut nbrs: HashMap<usize, HashSet<usize>> = HashMap::new();
        for &(u, v) in &out.structure {
            nbrs.entry(u).or_default().insert(v);
            nbrs.entry(v).or_default().insert(u);
        }
        let empty: HashSet<usize> = HashSet::new();
        let mut wedge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for &(i, j) in &split.forget {
            let ni = nbrs.get(&i).unwrap_or(&empty);
            let nj = nbrs.get(&j).unwrap_or(&empty);
            for &k in ni.intersection(nj) {
                let e1 = if i < k { (i, k) } else { (k, i) };
                let e2 = if j < k { (j, k) } else { (k, j) };
                *wedge_count.entry(e1).or_default() += 1;
                *wedge_count.entry(e2).or_default() += 1;
            }
        }
        let mut ranked: Vec<((usize, usize), usize)> = wedge_count.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let budget = split.forget.len() / 2;
        let prune: HashSet<(usize, usize)> =
            ranked.iter().take(budget).map(|&(e, _)| e).collect();
        println!(
            "seed {seed} wedge edges found {} pruning {}",
            ranked.len(),
            prune.len()
        );
        let mut out2 = out.clone();
        out2.structure.retain(|e| !prune.contains(e));
        out2.removals.extend(prune.iter().copied());
        let ev2 = evaluate_run(
            &bundle.graph,
            &split,
            &model.encoder,
            &out2,
            bundle.node_labels.as_deref(),
            seed,
        )
        .unwrap();
        println!(
            "seed {seed} gnndelete+wedge    au {:.2} kg {:.2}",
            ev2.auroc_test, ev2.knowledge_gap
        );
    }
}
