"""Regenerate the bundled fixture files under src/semfuse/fixtures/."""
import json
from pathlib import Path

from semfuse import synth
from semfuse.srl import LabelVocab

OUT = Path(__file__).resolve().parents[1] / "src" / "semfuse" / "fixtures"


def write_jsonl(name, rows):
    with open(OUT / name, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "vocab.txt").write_text("\n".join(synth.fixture_vocab_entries()) + "\n", encoding="utf-8")
    (OUT / "labels.txt").write_text("\n".join(LabelVocab.default().labels) + "\n", encoding="utf-8")
    write_jsonl("dorm_sentence.jsonl", [{"id": "dorm", "words_a": synth.DORM_WORDS, "srl_a": synth.DORM_FRAMES, "label": 0}])
    write_jsonl("nli_train.jsonl", synth.nli_examples(64, seed=11))
    write_jsonl("nli_dev.jsonl", synth.nli_examples(30, seed=12))
    write_jsonl("span_train.jsonl", synth.span_examples(30, seed=21))
    write_jsonl("span_dev.jsonl", synth.span_examples(15, seed=22))
    write_jsonl("sts_train.jsonl", synth.regression_examples(30, seed=31))
    write_jsonl("sts_dev.jsonl", synth.regression_examples(15, seed=32))


if __name__ == "__main__":
    main()
