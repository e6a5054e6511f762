use dexpipe::rl::*;

fn main() {
    for seed in [0u64, 1, 2] {
        let t0 = std::time::Instant::now();
        let mut envs: Vec<ToyReachEnv<f64>> = (0..8).map(|_| ToyReachEnv::new()).collect();
        let config = PpoConfig {
            total_env_steps: 200_000, horizon: 240, num_envs: 8,
            actor_hidden: vec![64, 64], critic_hidden: vec![64, 64],
            minibatch_size: 256, epochs: 4, learning_rate: 1e-3,
            entropy_coef: 0.0, reward_scale: 0.05, gamma: 0.95,
            log_std_init: -1.0, log_std_step_scale: 0.2, seed,
            early_stop_success: None, success_window: 50,
            ..PpoConfig::default()
        };
        let out = train_state_policy(&mut envs, &config).unwrap();
        let mut env = ToyReachEnv::<f64>::new();
        let mut succ = 0;
        for epi in 0..100u64 {
            let mut obs = env.reset(500_000 + epi).unwrap();
            loop {
                let a = out.policy.mean_action(&obs);
                let o = env.step(&a).unwrap();
                if o.done { break; }
                obs = o.obs;
            }
            if env.last_result().unwrap().success_3cm { succ += 1; }
        }
        let first10: f64 = out.curve.iter().take(10).map(|i| i.mean_episode_reward).sum::<f64>() / 10.0;
        let last10: f64 = out.curve.iter().rev().take(10).map(|i| i.mean_episode_reward).sum::<f64>() / 10.0;
        println!("seed {seed}: success {succ}/100, curve {first10:.0} -> {last10:.0} ({:?})", t0.elapsed());
    }
}
