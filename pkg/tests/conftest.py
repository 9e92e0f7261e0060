from __future__ import annotations

from pathlib import Path

import pytest

from fanref.ingest import GameRecord, GroundedComment, Play
from fanref.lexicon import Lexicon

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
MINICORPUS = DATA_DIR / "minicorpus"
FEW_SHOT = DATA_DIR / "few_shot.json"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def minicorpus_dir() -> Path:
    return MINICORPUS


@pytest.fixture(scope="session")
def few_shot_path() -> Path:
    return FEW_SHOT


@pytest.fixture(scope="session")
def lexicon() -> Lexicon:
    return Lexicon.load(MINICORPUS / "lexicon.json")


@pytest.fixture()
def three_play_game() -> GameRecord:
    plays = [
        Play(game_id="2022_01_DAL_PHI", play_index=1, ended_at=100, home_wp=0.55),
        Play(game_id="2022_01_DAL_PHI", play_index=2, ended_at=160, home_wp=0.60),
        Play(game_id="2022_01_DAL_PHI", play_index=3, ended_at=240, home_wp=0.35),
    ]
    return GameRecord(game_id="2022_01_DAL_PHI", home_team="PHI", away_team="DAL", plays=plays)


def make_grounded(
    comment_id: str = "c1",
    body: str = "we are winning",
    segmented: str | None = None,
    team: str = "PHI",
    opponent: str = "DAL",
    wp: float = 0.5,
    created_at: int = 120,
    parent_body: str | None = None,
) -> GroundedComment:
    if segmented is None:
        segmented = f"[SENT] {body}"
    return GroundedComment(
        id=comment_id,
        thread_id="t3_test",
        team=team,
        created_at=created_at,
        body=body,
        opponent=opponent,
        wp=wp,
        segmented_body=segmented,
        parent_id=None,
        parent_body=parent_body,
    )
