import json

import numpy as np
import pytest

from libs.diffusion import ODMatrix
from libs.errors import FormatError, ValidationError
from libs.features import write_embeddings
from libs.geo.boundaries import square_boundary
from libs.ingest.city import load_city, load_city_dir
from libs.ingest.geojson import load_boundaries, write_boundaries
from libs.ingest.tables import read_od, read_population, read_split, write_od, write_population, write_split


def _square(west: float, south: float, size: float = 0.01) -> list[list[list[float]]]:
    east, north = west + size, south + size
    return [[[west, south], [east, south], [east, north], [west, north], [west, south]]]


def _feature(properties, coordinates, geometry_type="Polygon", **extra):
    return {
        "type": "Feature",
        "properties": properties,
        "geometry": {"type": geometry_type, "coordinates": coordinates},
        **extra,
    }


def _write_geojson(path, features):
    path.write_text(json.dumps({"type": "FeatureCollection", "features": features}))
    return path


def test_load_boundaries_sorted_with_populations(tmp_path):
    """Regions come back sorted by id with their population properties."""
    path = _write_geojson(
        tmp_path / "b.geojson",
        [
            _feature({"region_id": "b", "population": 200}, _square(0.02, 0.0)),
            _feature({"region_id": "a", "population": 100.5}, _square(0.0, 0.0)),
        ],
    )
    parsed = load_boundaries(path)
    assert parsed.region_ids == ["a", "b"]
    assert parsed.populations == {"a": 100.5, "b": 200.0}


def test_region_id_sources(tmp_path):
    """Ids come from properties.region_id, properties.id or the feature id."""
    path = _write_geojson(
        tmp_path / "b.geojson",
        [
            _feature({"id": 7}, _square(0.0, 0.0)),
            _feature({}, _square(0.02, 0.0), id="x"),
        ],
    )
    assert load_boundaries(path).region_ids == ["7", "x"]


def test_multipolygon_union(tmp_path):
    """A MultiPolygon becomes one region with extra parts."""
    path = _write_geojson(
        tmp_path / "b.geojson",
        [_feature({"region_id": "m"}, [_square(0.0, 0.0), _square(0.05, 0.0)], "MultiPolygon")],
    )
    region = load_boundaries(path).boundaries[0]
    assert len(region.parts) == 2


@pytest.mark.parametrize(
    "content",
    [
        "{not json",
        json.dumps({"type": "FeatureCollection", "features": []}),
        json.dumps({"type": "FeatureCollection", "features": [{"type": "Feature", "geometry": {"type": "Point", "coordinates": [0, 0]}}]}),
    ],
)
def test_bad_boundary_files(tmp_path, content):
    """Broken JSON, empty collections and non-polygon geometries are format errors."""
    path = tmp_path / "b.geojson"
    path.write_text(content)
    with pytest.raises(FormatError, match="b.geojson"):
        load_boundaries(path)


def test_duplicate_and_degenerate_regions(tmp_path):
    """Repeated ids and zero-area rings are rejected."""
    duplicate = _write_geojson(
        tmp_path / "d.geojson",
        [_feature({"region_id": "a"}, _square(0.0, 0.0)), _feature({"region_id": "a"}, _square(0.1, 0.0))],
    )
    with pytest.raises(FormatError, match="duplicate"):
        load_boundaries(duplicate)
    flat = _write_geojson(
        tmp_path / "f.geojson",
        [_feature({"region_id": "a"}, [[[0, 0], [1, 0], [2, 0], [0, 0]]])],
    )
    with pytest.raises(FormatError):
        load_boundaries(flat)


def test_boundaries_write_then_load(tmp_path):
    """Written boundaries parse back to the same rings."""
    regions = [square_boundary("r2", 1.0, 1.0, 1.01, 1.01), square_boundary("r1", 1.02, 1.0, 1.03, 1.01)]
    parsed = load_boundaries(write_boundaries(tmp_path / "b.geojson", regions, {"r1": 5.0}))
    assert parsed.region_ids == ["r1", "r2"]
    assert parsed.boundaries[1].exterior == regions[0].exterior
    assert parsed.populations == {"r1": 5.0}


def test_read_population(tmp_path):
    """Populations parse with a decimal point only."""
    path = tmp_path / "p.csv"
    path.write_text("region_id,population\na,10\nb,2.5\n")
    assert read_population(path) == {"a": 10.0, "b": 2.5}


@pytest.mark.parametrize(
    "body,line",
    [
        ("a,1\na,2\n", 3),
        ("a,-1\n", 2),
        ('a,"1,000"\n', 2),
        ("a\n", 2),
    ],
)
def test_population_errors_name_the_line(tmp_path, body, line):
    """Duplicates, negatives, thousands separators and short rows cite their line."""
    path = tmp_path / "p.csv"
    path.write_text("region_id,population\n" + body)
    with pytest.raises(FormatError, match=rf"p\.csv:{line}"):
        read_population(path)


def test_population_header_required(tmp_path):
    """The header must be exactly region_id,population."""
    path = tmp_path / "p.csv"
    path.write_text("id,pop\na,1\n")
    with pytest.raises(FormatError):
        read_population(path)
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(FormatError):
        read_population(empty)


def test_read_od_edges(tmp_path):
    """Omitted pairs are zero flows; rows follow the requested id order."""
    path = tmp_path / "od.csv"
    path.write_text("origin_id,dest_id,flow\na,b,3\nb,a,1.0\nb,b,4\n")
    od = read_od(path, region_ids=["b", "a", "c"])
    assert od.region_ids == ("b", "a", "c")
    assert np.array_equal(od.F, [[4.0, 1.0, 0.0], [3.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


def test_read_od_dense(tmp_path):
    """The dense layout is reindexed to sorted ids by default."""
    path = tmp_path / "od.csv"
    path.write_text("region_id,b,a\nb,0,2\na,5,1\n")
    od = read_od(path)
    assert od.region_ids == ("a", "b")
    assert np.array_equal(od.F, [[1.0, 5.0], [2.0, 0.0]])


def test_read_od_errors(tmp_path):
    """Unknown ids are validation errors; duplicate pairs are format errors."""
    unknown = tmp_path / "u.csv"
    unknown.write_text("origin_id,dest_id,flow\na,z,3\n")
    with pytest.raises(ValidationError, match="z"):
        read_od(unknown, region_ids=["a", "b"])
    duplicate = tmp_path / "d.csv"
    duplicate.write_text("origin_id,dest_id,flow\na,b,3\na,b,4\n")
    with pytest.raises(FormatError, match=r"d\.csv:3"):
        read_od(duplicate)
    header = tmp_path / "h.csv"
    header.write_text("from,to,n\n")
    with pytest.raises(FormatError):
        read_od(header)


@pytest.mark.parametrize(
    "body,line",
    [
        ("origin_id,dest_id,flow\na,b,3\nb,a,-2\n", 3),
        ("region_id,a,b\na,0,1\nb,-0.5,0\n", 3),
    ],
)
def test_read_od_rejects_negative_flows(tmp_path, body, line):
    """Negative flows are format errors citing their line in both layouts."""
    path = tmp_path / "od.csv"
    path.write_text(body)
    with pytest.raises(FormatError, match=rf"od\.csv:{line}: Flow must be >= 0"):
        read_od(path)


@pytest.mark.parametrize("layout", ["edges", "dense"])
def test_write_od_layouts(tmp_path, layout):
    """Both layouts read back to the written matrix."""
    od = ODMatrix(("x", "y", "z"), np.array([[0.0, 2.0, 0.0], [1.5, 0.0, 7.0], [0.0, 0.0, 3.0]]))
    loaded = read_od(write_od(od, tmp_path / "od.csv", format=layout))
    assert loaded.region_ids == od.region_ids
    assert np.array_equal(loaded.F, od.F)


def test_split_file(tmp_path):
    """Split files list each city once under train, val or test."""
    path = write_split(tmp_path / "split.csv", {"train": ["c2", "c1"], "test": ["c3"]})
    assert read_split(path) == {"train": ["c1", "c2"], "val": [], "test": ["c3"]}
    bad = tmp_path / "bad.csv"
    bad.write_text("city_id,split\nc1,holdout\n")
    with pytest.raises(FormatError, match=r"bad\.csv:2"):
        read_split(bad)


def _city_dir(tmp_path):
    city = tmp_path / "city"
    city.mkdir()
    regions = [square_boundary("a", 0.0, 0.0, 0.01, 0.01), square_boundary("b", 0.02, 0.0, 0.03, 0.01)]
    write_boundaries(city / "boundaries.geojson", regions, {"a": 1.0, "b": 1.0})
    write_population(city / "population.csv", {"a": 100, "b": 300})
    write_embeddings(city / "embeddings.csv", {"a": np.array([0.5, 1.0]), "b": np.array([1.5, 2.0])})
    write_od(ODMatrix(("a", "b"), np.array([[1.0, 2.0], [3.0, 4.0]])), city / "od.csv")
    return city


def test_load_city_dir(tmp_path, caplog):
    """A conventional city directory loads every input, CSV populations first."""
    bundle = load_city_dir(_city_dir(tmp_path))
    assert bundle.name == "city"
    assert bundle.region_ids == ("a", "b")
    assert [g.population for g in bundle.geos] == [100.0, 300.0]
    assert [f.population for f in bundle.features] == [100.0, 300.0]
    assert np.array_equal(bundle.od.F, [[1.0, 2.0], [3.0, 4.0]])
    assert bundle.distances().shape == (2, 2)
    assert "differ from the GeoJSON" in caplog.text


def test_load_city_coverage(tmp_path):
    """Populations and embeddings must cover exactly the boundary ids."""
    city = _city_dir(tmp_path)
    write_population(city / "population.csv", {"a": 100})
    with pytest.raises(ValidationError):
        load_city(city / "boundaries.geojson", city / "population.csv")
    write_population(city / "population.csv", {"a": 100, "b": 300})
    write_embeddings(city / "embeddings.csv", {"a": np.ones(2), "b": np.ones(2), "c": np.ones(2)})
    with pytest.raises(ValidationError):
        load_city(city / "boundaries.geojson", city / "population.csv", city / "embeddings.csv")


def test_city_dir_needs_boundaries(tmp_path):
    """Without boundaries.geojson there is no city."""
    with pytest.raises(FormatError):
        load_city_dir(tmp_path)
