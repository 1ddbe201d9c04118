from .calendar import parse_timestamp, time_features, to_timestamp
from .dataset import (
    Dataset,
    DatasetBundle,
    EmptySplitError,
    SplitSpec,
    build_dataset,
    load_bundle,
    read_dataset_csv,
    save_bundle,
    split_indices,
    write_dataset_csv,
)
from .geo import EARTH_RADIUS_M, NYC_BOX, BoundingBox, grid_cells, grid_index, haversine
from .outliers import CRITERIA, FilterReport, OutlierCriteria, filter_outliers
from .records import (
    FORMATS,
    FormatSpec,
    IngestError,
    ParseResult,
    Reject,
    TripRecord,
    parse_trips,
    trips_to_columns,
    write_trips_csv,
)
from .schema import FeatureSchema, FeatureSpec, default_schema, engineer_features
from .weather import WeatherSeries, attach_temperature, read_weather, write_weather
