// Scratch probe during bring-up: train a small slice of the zoo on the
// desk corpus and print accuracies and attack success rates.

use std::time::Instant;

use transferlab::attack::pwws_attack;
use transferlab::synth::{desk_dataset, SynthConfig};
use transferlab::transfer::{generate_adversarial_set, transfer_rate, AttackEngine, TransferBudget};
use transferlab::zoo::{train, ModelSpec, TrainConfig};

fn main() {
    let cfg = SynthConfig::default();
    let t0 = Instant::now();
    let (data, synonyms, _pos) = desk_dataset(&cfg).unwrap();
    println!(
        "corpus: {} train / {} test  ({:?})",
        data.train.len(),
        data.test.len(),
        t0.elapsed()
    );

    let hyper = TrainConfig::default();
    let specs = [
        "linbow-word-rand-1-0",
        "avgmlp-word-rand-1-0",
        "conv1d-word-rand-1-0",
        "recur-word-rand-1-0",
        "linbow-char-rand-1-0",
        "avgmlp-char-rand-1-0",
        "conv1d-char-rand-1-0",
        "recur-char-rand-1-0",
        "recur-word-rand-2-0",
    ];
    let mut models = Vec::new();
    for id in specs {
        let spec = ModelSpec::parse_id(id).unwrap();
        let t = Instant::now();
        let clf = train(&spec, &data, &hyper, None).unwrap();
        println!(
            "{id:26} train_acc={:.3} test_acc={:.3}  ({:?})",
            clf.report().train_accuracy,
            clf.report().test_accuracy,
            t.elapsed()
        );
        models.push(std::sync::Arc::new(clf));
    }

    // Attack success + a tiny transfer probe.
    let budget = TransferBudget {
        attacked: 100,
        transferred: 60,
        seed: 3,
    };
    for m in &models {
        let t = Instant::now();
        let sample = transferlab::transfer::sample_attack_examples(&data, 100, 3);
        let mut success = 0;
        let mut queries = 0u64;
        for ex in &sample {
            let r = pwws_attack(m.as_ref(), ex, &synonyms);
            if r.success {
                success += 1;
            }
            queries += r.queries;
        }
        println!(
            "pwws vs {:26} success {:>3}/100  mean queries {:>5.1}  ({:?})",
            m.id(),
            success,
            queries as f64 / 100.0,
            t.elapsed()
        );
    }

    let source = &models[1]; // avgmlp-word
    let set = generate_adversarial_set(
        source.as_ref(),
        &data,
        &synonyms,
        &AttackEngine::Pwws,
        &budget,
    )
    .unwrap();
    println!("\ntransfer of avgmlp-word-rand-1-0 attacks ({} examples):", set.len());
    for m in &models {
        let r = transfer_rate(&set, m.as_ref()).unwrap();
        println!("  -> {:26} {:.3}", m.id(), r);
    }
    println!("total {:?}", t0.elapsed());
}
