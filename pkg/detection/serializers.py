"""
Serializers for cascade model files.
"""
from rest_framework import serializers

SUPPORTED_VERSIONS = (1,)


class HaarFeatureSerializer(serializers.Serializer):
    kind = serializers.CharField(max_length=32)
    # each rect is [x, y, w, h, weight]
    rects = serializers.ListField(
        child=serializers.ListField(child=serializers.IntegerField(), min_length=5, max_length=5),
        min_length=1,
    )


class WeakClassifierSerializer(serializers.Serializer):
    feature = HaarFeatureSerializer()
    threshold = serializers.FloatField()
    parity = serializers.ChoiceField(choices=[-1, 1])
    alpha = serializers.FloatField(default=1.0)


class LbpPositionSerializer(serializers.Serializer):
    x = serializers.IntegerField(min_value=0)
    y = serializers.IntegerField(min_value=0)
    block = serializers.IntegerField(min_value=1, default=1)
    table = serializers.DictField(child=serializers.FloatField())

    def validate_table(self, value):
        """Sparse table: code (0..255) -> score; missing codes score 0."""
        for key in value:
            if not str(key).isdigit() or not 0 <= int(key) <= 255:
                raise serializers.ValidationError(f"Code '{key}' is not in 0..255.")
        return value


class StageSerializer(serializers.Serializer):
    type = serializers.ChoiceField(choices=['haar', 'lbp'])
    threshold = serializers.FloatField()
    classifiers = WeakClassifierSerializer(many=True, required=False)
    positions = LbpPositionSerializer(many=True, required=False)

    def validate(self, attrs):
        key = 'classifiers' if attrs['type'] == 'haar' else 'positions'
        if not attrs.get(key):
            raise serializers.ValidationError({key: f"A {attrs['type']} stage needs {key}."})
        return attrs


class CascadeSerializer(serializers.Serializer):
    version = serializers.IntegerField()
    name = serializers.CharField(max_length=128, default='cascade')
    base_window = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=2, max_length=2)
    stages = StageSerializer(many=True)

    def validate_version(self, value):
        if value not in SUPPORTED_VERSIONS:
            raise serializers.ValidationError(f"Unsupported cascade version {value}.")
        return value
