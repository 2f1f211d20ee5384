"""Parse a transcript corpus and inspect segment-level texture.

Generates a small synthetic corpus so the demo is self-contained,
parses it back through the strict loader, and prints token counts, the
language mix, and speaking-rate ratings for one session.

Run: python3 demos/01_parse_and_tokenize.py
"""

import shutil
from pathlib import Path

from dialoglens.corpus import count_tokens, language_proportions, load_corpus_dir
from dialoglens.features import speaking_rate
from dialoglens.synth import SyntheticSpec, generate_corpus

OUT = Path(__file__).resolve().parent / "output" / "01_corpus"


def main():
    shutil.rmtree(OUT, ignore_errors=True)
    OUT.mkdir(parents=True)
    generate_corpus(SyntheticSpec(groups=3, weeks=2, mean_segments=14.0, seed=5), OUT)
    print(f"synthetic corpus written to {OUT}")

    dialogs = load_corpus_dir(OUT / "transcripts", roster_path=OUT / "roster.json")
    print(f"parsed {len(dialogs)} sessions "
          f"({sum(len(d.segments) for d in dialogs)} segments total)\n")

    dialog = dialogs[0]
    roster = ", ".join(sorted(s.serialize() for s in dialog.roster))
    print(f"{dialog.group_id} week {dialog.week}: {len(dialog.segments)} segments, "
          f"roster [{roster}]")
    print(f"{'span':>17}  {'who':4} {'tok':>3} {'en%':>4} {'rate':>10}  text")
    for seg in dialog.segments[:12]:
        counts = count_tokens(seg.text)
        eng, _chn = language_proportions(seg.text)
        rating = speaking_rate(seg)
        span = f"{seg.start:7.2f}-{seg.end:7.2f}"
        print(f"{span:>17}  {seg.speaker.serialize():4} {counts.total:3d} "
              f"{eng:4.0%} {rating.rate:6.1f}/min "
              f"{rating.category.name.lower():6}  {seg.text[:44]}")

    mixed = [d for d in dialogs for s in d.segments if count_tokens(s.text).chinese_chars]
    print(f"\nsessions containing code-switched segments: "
          f"{len({(d.group_id, d.week) for d in mixed})} of {len(dialogs)}")


if __name__ == "__main__":
    main()
