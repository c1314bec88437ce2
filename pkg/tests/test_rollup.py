import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from schoolnoise.ingest import IngestService
from schoolnoise.readings import NoiseReading
from schoolnoise.rollup import ALL_ROOMS, AggregateBucket, Granularity, Rollup, combine, fold

from .oracles import leq_reference

T0 = 1_552_262_400  # 2019-03-11T00:00:00Z
G5, GH, GD = Granularity.FIVE_MIN, Granularity.HOUR, Granularity.DAY
SCOPE = ("a", "1")


def bucket(count, value, g=G5, start=T0, scope=SCOPE):
    return AggregateBucket(scope, g, start, count, count * 10 ** (value / 10), value, value)


buckets = st.builds(
    lambda c, v, w: combine(bucket(c, v), bucket(1, w)),
    st.integers(1, 600), st.floats(0, 140), st.floats(0, 140),
)


def test_leq_spot_value():
    b = combine(bucket(1, 60), bucket(1, 70))
    assert b.sample_count == 2
    assert b.leq == pytest.approx(67.40, abs=0.01)
    assert b.leq == pytest.approx(leq_reference([60, 70]), abs=1e-9)


@given(buckets)
def test_identity(x):
    e = AggregateBucket.empty(SCOPE, G5, T0)
    assert combine(x, e) == x == combine(e, x)


@given(buckets, buckets)
def test_commutative(a, b):
    assert combine(a, b) == combine(b, a)


@given(buckets, buckets, buckets)
def test_associative(a, b, c):
    l, r = combine(combine(a, b), c), combine(a, combine(b, c))
    assert l.sample_count == r.sample_count and (l.min_db, l.max_db) == (r.min_db, r.max_db)
    assert abs(l.leq - r.leq) <= 1e-9


@given(st.lists(buckets, min_size=1, max_size=8))
def test_min_leq_max(bs):
    b = fold(bs, SCOPE, G5, T0)
    assert b.min_db - 1e-9 <= b.leq <= b.max_db + 1e-9


def test_combine_rejects_mismatch():
    with pytest.raises(ValueError):
        combine(bucket(1, 60), bucket(1, 60, scope=("a", "2")))
    with pytest.raises(ValueError):
        combine(bucket(1, 60), bucket(1, 60, g=GH))


def test_granularity_floor():
    t = T0 + 3 * 3600 + 17 * 60 + 5
    assert G5.floor(t) == T0 + 3 * 3600 + 15 * 60
    assert GH.floor(t) == T0 + 3 * 3600
    assert GD.floor(t) == T0


def _reading(slot, value, room="1", node=None):
    return NoiseReading(node or f"a-{room}", "a", room, T0 + slot * 300, 300, value, 300)


def test_fan_out_six_keys():
    keys = Rollup().apply_reading(_reading(100, 60))
    assert len(keys) == 6
    assert {k[0] for k in keys} == {SCOPE, ("a", ALL_ROOMS)}


def test_empty_queries():
    r = Rollup()
    assert r.query_buckets(SCOPE, GH, T0, T0 + 86400) == []
    assert r.get_bucket(SCOPE, GH, T0) is None
    with pytest.raises(ValueError):
        r.query_buckets(SCOPE, GH, T0, T0)


def test_singleton_and_day_selection():
    svc = IngestService(clock=lambda: T0 + 10 * 86400)
    svc.ingest_readings([_reading(96, 61.5)])
    hour = svc.rollup.rebuild_bucket(SCOPE, GH, T0 + 8 * 3600)
    assert hour == AggregateBucket.from_reading(_reading(96, 61.5), SCOPE, GH)
    assert svc.rollup.rebuild_bucket(SCOPE, GH, T0 + 9 * 3600) is None
    svc.ingest_readings([_reading(s, 50.0) for s in range(288) if s != 96])
    assert len(svc.rollup.query_buckets(SCOPE, GH, T0, T0 + 86400)) == 24
    assert len(svc.rollup.query_buckets(SCOPE, GD, T0, T0 + 86400)) == 1


def test_twelve_five_minute_buckets_fold_to_hour():
    svc = IngestService(clock=lambda: T0 + 10 * 86400)
    rs = [_reading(96 + i, 50 + 2 * i) for i in range(12)]
    svc.ingest_readings(rs)
    fives = [AggregateBucket.from_reading(r, SCOPE, G5) for r in rs]
    expect = fold(fives, SCOPE, GH, T0 + 8 * 3600)
    assert svc.rollup.rebuild_bucket(SCOPE, GH, T0 + 8 * 3600) == expect
    got = svc.rollup.get_bucket(SCOPE, GH, T0 + 8 * 3600)
    assert got.sample_count == expect.sample_count
    assert math.isclose(got.energy_sum, expect.energy_sum, rel_tol=1e-12)


def test_all_scope_weights_by_sample_count():
    r = Rollup()
    r.apply_batch([
        NoiseReading("n1", "a", "1", T0, 300, 60.0, 100),
        NoiseReading("n2", "a", "2", T0, 300, 70.0, 300),
    ])
    b = r.get_bucket(("a", ALL_ROOMS), G5, T0)
    assert b.sample_count == 400
    assert b.leq == pytest.approx(10 * math.log10((100 * 1e6 + 300 * 1e7) / 400), abs=1e-9)


def test_late_reading_matches_rebuild():
    svc = IngestService(clock=lambda: T0 + 10 * 86400)
    svc.ingest_readings([_reading(s, 55.0) for s in range(0, 288, 2)])
    assert svc.rollup.get_bucket(SCOPE, GD, T0) is not None
    svc.ingest_readings([_reading(s, 70.0) for s in range(1, 288, 2)])
    a, b = svc.rollup.get_bucket(SCOPE, GD, T0), svc.rollup.rebuild_bucket(SCOPE, GD, T0)
    assert a.sample_count == b.sample_count == 288 * 300
    assert abs(a.leq - b.leq) <= 1e-9


def test_shuffled_replay_same_aggregates():
    rng = random.Random(3)
    rs = [_reading(rng.randrange(600), rng.uniform(30, 90), room=str(rng.randrange(3))) for _ in range(400)]
    rs = list({r.key: r for r in rs}.values())
    ordered, shuffled = IngestService(clock=lambda: T0 + 9e6), IngestService(clock=lambda: T0 + 9e6)
    ordered.ingest_readings(sorted(rs, key=lambda r: r.window_start))
    rng.shuffle(rs)
    for i in range(0, len(rs), 37):
        shuffled.ingest_readings(rs[i:i + 37])
    keys = sorted(ordered.rollup.bucket_keys())
    assert keys == sorted(shuffled.rollup.bucket_keys())
    for k in keys:
        x, y = ordered.rollup.get_bucket(*k), shuffled.rollup.get_bucket(*k)
        assert x.sample_count == y.sample_count and (x.min_db, x.max_db) == (y.min_db, y.max_db)
        assert abs(x.leq - y.leq) <= 1e-9
