"""
Serializers for scenario config files (YAML or JSON).
"""
from rest_framework import serializers

from .models import MODEL_KINDS, MODES


class ArrayParamsSerializer(serializers.Serializer):
    inner_diameter = serializers.FloatField(min_value=0.0, required=False)
    outer_diameter = serializers.FloatField(min_value=0.0, required=False)
    n_inner = serializers.IntegerField(min_value=0, required=False)
    n_outer = serializers.IntegerField(min_value=0, required=False)
    angular_offset = serializers.FloatField(required=False)


class GridParamsSerializer(serializers.Serializer):
    n_u = serializers.IntegerField(min_value=1, required=False)
    n_v = serializers.IntegerField(min_value=1, required=False)
    distance = serializers.FloatField(min_value=0.0, required=False)
    half_width = serializers.FloatField(min_value=0.0, required=False)
    half_height = serializers.FloatField(min_value=0.0, required=False)


class ScenarioConfigSerializer(serializers.Serializer):
    """Every key is optional here; settings and flags supply what a file leaves out."""
    scene = serializers.CharField(required=False)
    out = serializers.CharField(required=False)
    array = ArrayParamsSerializer(required=False)
    grid = GridParamsSerializer(required=False)
    cascade = serializers.CharField(required=False, allow_null=True)
    face_model = serializers.CharField(required=False, allow_null=True)
    frames = serializers.IntegerField(min_value=1, required=False)
    seed = serializers.IntegerField(min_value=0, required=False)
    mode = serializers.ChoiceField(choices=MODES, required=False)
    components = serializers.IntegerField(min_value=1, required=False)
    knn_k = serializers.IntegerField(min_value=1, required=False)
    unknown_threshold = serializers.FloatField(min_value=0.0, required=False, allow_null=True)
    model_kind = serializers.ChoiceField(choices=MODEL_KINDS, required=False)
    identities = serializers.ListField(child=serializers.CharField(max_length=64), min_length=1, required=False)
    images_per_identity = serializers.IntegerField(min_value=2, required=False)
    image_size = serializers.ListField(child=serializers.IntegerField(min_value=24), min_length=2, max_length=2,
                                       required=False)
    sample_rate = serializers.FloatField(min_value=1.0, required=False)
    frame_length = serializers.IntegerField(min_value=64, required=False)
    bandwidth_threshold = serializers.FloatField(min_value=0.0, required=False)
    scale_factor = serializers.FloatField(min_value=1.0001, required=False)
    detection_step = serializers.IntegerField(min_value=1, required=False)
    min_neighbors = serializers.IntegerField(min_value=1, required=False)
    colocate_fraction = serializers.FloatField(min_value=0.0, required=False)
    proximity_fraction = serializers.FloatField(min_value=0.0, required=False)
    talk_floor_factor = serializers.FloatField(min_value=0.0, required=False)
    workers = serializers.IntegerField(min_value=1, max_value=64, required=False)
    annotate = serializers.BooleanField(required=False)

    def validate_identities(self, value):
        if len(set(value)) != len(value):
            raise serializers.ValidationError('Identities must be distinct.')
        return value

    def validate_colocate_fraction(self, value):
        if value <= 0:
            raise serializers.ValidationError('Co-location fraction must be positive.')
        return value

    def validate(self, attrs):
        array = attrs.get('array') or {}
        inner, outer = array.get('inner_diameter'), array.get('outer_diameter')
        if inner is not None and outer is not None and outer <= inner:
            raise serializers.ValidationError({'array': 'outer_diameter must exceed inner_diameter.'})
        return attrs
