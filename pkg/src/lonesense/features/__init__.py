from .catalog import (
    DEFAULT_APP_CATEGORIES,
    DEFAULT_CATEGORY_MAP,
    FeatureCatalog,
    FeatureDef,
    build_catalog,
)
from .daily import (
    DailyFeatureRow,
    empty_row,
    extract_all,
    extract_day,
    extract_participant,
    read_feature_tables,
    write_feature_tables,
)
from .describe import describe_feature, format_number
from .extractors import (
    Day,
    ExtractionParams,
    FeatureMap,
    extract_applications,
    extract_battery,
    extract_calls,
    extract_keyboard,
    extract_locations,
    extract_messages,
    extract_screen,
)
from .location import StayCluster, cluster_stays, detect_stays, haversine

__all__ = [
    "DEFAULT_APP_CATEGORIES",
    "DEFAULT_CATEGORY_MAP",
    "DailyFeatureRow",
    "Day",
    "ExtractionParams",
    "FeatureCatalog",
    "FeatureDef",
    "FeatureMap",
    "StayCluster",
    "build_catalog",
    "cluster_stays",
    "describe_feature",
    "detect_stays",
    "empty_row",
    "extract_all",
    "extract_applications",
    "extract_battery",
    "extract_calls",
    "extract_day",
    "extract_keyboard",
    "extract_locations",
    "extract_messages",
    "extract_participant",
    "extract_screen",
    "format_number",
    "haversine",
    "read_feature_tables",
    "write_feature_tables",
]
