"""Run the full search-model suite over both shipped curricula and print
the per-model solve profile plus the oracle-versus-retrospective
compression comparison. Writes run records next to the chosen output
directory. Usage:

    python3 scripts/run_model_suite.py [--out-dir runs/] [--budget N] [--seed S]
"""

from __future__ import annotations

import argparse
import pathlib

from patternbuilder.curriculum import build_e1, load_e2
from patternbuilder.learning import compression_utility, greedy_select, oracle_helpers
from patternbuilder.programs import expand, subtrees
from patternbuilder.runner import RunSpec, run_curriculum, save_run_record
from patternbuilder.synthesis import SynthesisBudget


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out-dir", default="runs")
    parser.add_argument("--budget", type=int, default=SynthesisBudget().max_candidates)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--k", type=int, default=1)
    parser.add_argument("--q", type=float, default=0.3)
    args = parser.parse_args()

    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    budget = SynthesisBudget(max_candidates=args.budget)

    for cur in (build_e1(), load_e2()):
        print(f"== {cur.name} ({len(cur)} trials) ==")
        for model in ("nolib", "gl", "rc", "pl", "oracle"):
            spec = RunSpec(
                model=model, budget=budget, k=args.k, q=args.q, seed=args.seed
            )
            record = run_curriculum(cur, spec)
            path = out_dir / f"{cur.name}_{model}.json"
            save_run_record(record, str(path))
            solved = record.solved_trials()
            failed = [t.trial for t in record.trials if not t.solved]
            print(
                f"  {model:6s} solved {record.solved_count:2d}/{len(cur)}"
                + (f"  failed trials: {failed}" if failed else "")
            )
        corpus = [expand(s) for s in cur.solutions()]
        strict = []
        for t in range(1, len(cur) + 1):
            pool = [s for sol in corpus[:t] for s in subtrees(sol)]
            cu_oracle = compression_utility(
                oracle_helpers(corpus, t, k=args.k, seed=args.seed), corpus
            )
            cu_rc = compression_utility(
                greedy_select(pool, corpus[:t], k=args.k, seed=args.seed), corpus
            )
            if cu_oracle > cu_rc:
                strict.append(t)
            assert cu_oracle >= cu_rc
        print(f"  oracle > retrospective utility on trials: {strict}")
    print(f"run records -> {out_dir}/")


if __name__ == "__main__":
    main()
