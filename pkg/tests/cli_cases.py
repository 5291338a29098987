"""Shared CLI inputs and the command list exercised by the determinism checks."""
import json
import shutil
from pathlib import Path

from propeval.cli import main
from propeval.data_model import save_dataset, save_proposals
from propeval.proposers import DmpConfig, oracle_dmp, random_proposer
from propeval.synth import SynthConfig, generate_dataset

FIX = Path(__file__).parent / "fixtures"


def build_inputs(root: Path) -> dict:
    root.mkdir(parents=True, exist_ok=True)
    synth = {"seed": 3, "num_images": 40, "num_categories": 6}
    (root / "synth.json").write_text(json.dumps(synth))
    (root / "dmp.toml").write_text("seed = 3\nhit_rate = 0.8\n")
    (root / "eval.json").write_text(json.dumps({"proposal_budgets": [1, 10, 100]}))
    full, _ = generate_dataset(SynthConfig(**synth))
    save_dataset(full, root / "full.json")
    save_proposals(random_proposer(full, 120, seed=3), root / "random.csv")
    dmp = oracle_dmp(full, DmpConfig(seen_categories={0, 1, 2}, seed=3))
    save_proposals(dmp, root / "dmp.json")
    for k in (1, 4):
        save_proposals(oracle_dmp(full, DmpConfig(seen_categories=range(k), seed=3)), root / f"seen{k}.csv")
    (root / "runs.csv").write_text("seen_count,path,method\n1,seen1.csv,dmp\n4,seen4.csv,dmp\n")
    (root / "supercats.csv").write_text("category,supercategory\n" + "".join(
        f"c{k:02d},{'even' if k % 2 == 0 else 'odd'}\n" for k in range(6)))
    shutil.copytree(FIX / "voc", root / "voc", dirs_exist_ok=True)
    shutil.copy(FIX / "coco.json", root / "coco.json")
    return {k: str(root / k) for k in
            ("synth.json", "dmp.toml", "eval.json", "full.json", "random.csv", "dmp.json", "runs.csv",
             "supercats.csv", "voc", "coco.json")}


def commands(i: dict, out: str) -> dict[str, list[str]]:
    """Named CLI invocations writing into ``out``; ``--threads`` is appended by the caller."""
    return {
        "eval": ["eval", i["full.json"], i["random.csv"], i["dmp.json"], "--out", f"{out}/eval"],
        "eval-config": ["eval", i["full.json"], i["dmp.json"], "--config", i["eval.json"], "--out", f"{out}/evalc"],
        "gameability": ["gameability", i["full.json"], i["random.csv"], i["dmp.json"],
                        "--subset", "c00,c01,c02", "--full-suite", "--out", f"{out}/game"],
        "bias-capacity-sim": ["bias-capacity", "--simulate", i["synth.json"], "--dmp", i["dmp.toml"],
                              "--seen-counts", "1,3,6", "--random-control", "30", "--out", f"{out}/bias"],
        "bias-capacity-runs": ["bias-capacity", i["full.json"], "--runs", i["runs.csv"], "--out", f"{out}/biasr"],
        "synth": ["synth", i["synth.json"], "--out", f"{out}/synth"],
        "stats": ["stats", i["full.json"], "--subset", "c00,c01", "--out", f"{out}/stats"],
        "finegrained": ["finegrained", i["full.json"], i["dmp.json"], "--out", f"{out}/fg"],
        "finegrained-super": ["finegrained", i["full.json"], i["dmp.json"], "--key", "supercategory",
                              "--supercategory-map", i["supercats.csv"], "--out", f"{out}/fgs"],
        "convert-voc": ["convert", i["voc"], f"{out}/conv/voc.json", "--from", "voc", "--to", "canonical"],
        "convert-coco": ["convert", i["coco.json"], f"{out}/conv/coco.json", "--from", "coco", "--to", "coco"],
        "convert-proposals": ["convert", i["random.csv"], f"{out}/conv/random.json", "--from", "csv", "--to", "json"],
    }


def run_all(inputs: dict, out: Path, threads: int) -> dict[str, bytes]:
    """Run every command; return {relative path: bytes} of every output file."""
    (out / "conv").mkdir(parents=True, exist_ok=True)
    for name, argv in commands(inputs, str(out)).items():
        code = main([*argv, "--threads", str(threads)])
        if code != 0:
            raise AssertionError(f"{name} exited with {code}")
    return {str(p.relative_to(out)): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}
