from latent_dim import build_config, generate, sweep

config = build_config(
    {
        "problem": {"kind": "darcy"},
        "mesh": {"n_div": 10},
        "snapshots": {"count": 100, "seed": 2024},
        "random_field": {"kl_modes": 40},
        "sweep": {"latent_dims": [1, 2, 4, 8]},
        "train": {"epochs": 50},
        "output": {"directory": "/tmp/darcy"},
    }
)

summary = generate(config)
assert (summary.rows, summary.output_cols) == (100, 121)

report = sweep(config)
for row in report.rows:
    print(row.n, row.e_ae, row.e_pod, row.sqrt_tail_mu, row.sqrt_tail_u)

# The decay rates of the four columns
print(report.slopes)
