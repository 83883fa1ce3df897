"""Regenerate the bundled example model files from the package fixtures.

Run from the repository root:

    python3 scripts/write_example_models.py
"""

import pathlib

from pomdp_geometry import fixtures
from pomdp_geometry.model import serialize_model

OUT = pathlib.Path(__file__).resolve().parent.parent / "models"


def main():
    OUT.mkdir(exist_ok=True)
    (OUT / "two_state.json").write_text(serialize_model(fixtures.two_state_model()))
    (OUT / "three_state.json").write_text(
        serialize_model(fixtures.three_state_model())
    )
    (OUT / "blind_three_state.graph").write_text(fixtures.GRAPH_BLIND_THREE_STATE)
    (OUT / "blind_three_state.json").write_text(
        serialize_model(fixtures.blind_three_state_model())
    )
    for name in (
        "two_state.json",
        "three_state.json",
        "blind_three_state.graph",
        "blind_three_state.json",
    ):
        print(f"wrote models/{name}")


if __name__ == "__main__":
    main()
