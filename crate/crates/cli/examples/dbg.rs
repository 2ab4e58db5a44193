use abn_cli::config::{parse_config, Overrides, build_policy, build_network_config};
use abn_cli::dataset::load_labeled;
use abn_core::network::{init_network, evaluate, ForwardOpts};
use abn_core::network::train::{train_epoch, TrainConfig, Loss};

fn main() {
    let text = std::fs::read_to_string(std::env::args().nth(1).unwrap()).unwrap();
    let cfg = parse_config(&text, &Overrides::default()).unwrap();
    let ds = load_labeled(&cfg).unwrap();
    let policy = build_policy(&cfg, cfg.policy.kind).unwrap();
    let nc = build_network_config(&cfg, ds.input_size, ds.num_classes, policy).unwrap();
    let mut net = init_network(&nc, cfg.seed).unwrap();
    let tc = TrainConfig { learning_rate: cfg.train.learning_rate, epochs: cfg.train.epochs,
        batch_size: cfg.train.batch_size, surrogate_width: cfg.train.surrogate_width,
        loss: Loss::CrossEntropyOnRates };
    let start = std::time::Instant::now();
    for epoch in 0..tc.epochs {
        let (loss, acc) = train_epoch(&mut net, &ds.train, &tc, epoch).unwrap();
        if epoch % 2 == 0 || epoch == tc.epochs - 1 {
            let ev = evaluate(&net, &ds.test, &ForwardOpts::default()).unwrap();
            println!("epoch {epoch}: loss {loss:.4} train_acc {acc:.2} test_acc {:.2} [{:.1}s]",
                ev.accuracy, start.elapsed().as_secs_f32());
        }
    }
}
