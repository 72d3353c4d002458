from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone

import pytest

from forum_sentinel.corpus import AuthorRole, Post, SubForumType, Thread, filter_and_label

BASE_TS = datetime(2020, 1, 6, 10, 0, 0, tzinfo=timezone.utc)


def make_post(i: int, role: str = "student", text: str = "hello there friend", parent: str | None = None) -> Post:
    return Post(
        post_id=f"p{i}",
        author_id=f"u{i}",
        role=AuthorRole(role),
        timestamp=BASE_TS + timedelta(minutes=i),
        text=text,
        parent_post_id=parent,
    )


def make_thread(
    roles: list[str],
    texts: list[str] | None = None,
    parents: list[str | None] | None = None,
    course: str = "C1",
    tid: str = "t1",
    subforum: str = "lecture",
    labeled: bool = True,
) -> Thread:
    texts = texts or ["hello there friend"] * len(roles)
    parents = parents or [None] * len(roles)
    raw = Thread(
        course_id=course,
        thread_id=tid,
        subforum=SubForumType(subforum),
        posts=tuple(make_post(i, role, text, parent) for i, (role, text, parent) in enumerate(zip(roles, texts, parents))),
    )
    if not labeled:
        return raw
    filtered = filter_and_label([raw])
    assert filtered, "factory produced a thread the filter drops; pass labeled=False"
    return filtered[0]


def record(course="C1", tid="t1", subforum="lecture", posts=None) -> dict:
    posts = posts if posts is not None else [post_obj(0)]
    return {"course_id": course, "thread_id": tid, "subforum": subforum, "posts": posts}


def post_obj(i: int, role="student", text="hello there friend", ts=None, parent=None) -> dict:
    obj = {
        "post_id": f"p{i}",
        "author_id": f"u{i}",
        "role": role,
        "timestamp": ts or (BASE_TS + timedelta(minutes=i)).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "text": text,
    }
    if parent is not None:
        obj["parent_post_id"] = parent
    return obj


@pytest.fixture
def corpus_file(tmp_path):
    def write(records: list[dict], name: str = "corpus.jsonl"):
        path = tmp_path / name
        path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
        return path

    return write
