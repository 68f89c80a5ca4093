"""
Serializers for face model files.
"""
import math

from rest_framework import serializers

SUPPORTED_VERSIONS = (1,)
MODEL_KINDS = ('eigen', 'fisher', 'lbph')
ARRAY_DTYPE = '<f8'
REQUIRED_ARRAYS = {
    'eigen': ('mean', 'eigenfaces', 'eigenvalues', 'gallery'),
    'fisher': ('mean', 'projection', 'class_means', 'gallery'),
    'lbph': ('gallery',),
}


class ArraySerializer(serializers.Serializer):
    dtype = serializers.ChoiceField(choices=[ARRAY_DTYPE])
    shape = serializers.ListField(child=serializers.IntegerField(min_value=0), max_length=2)
    hex = serializers.CharField(allow_blank=True, trim_whitespace=False)

    def validate(self, attrs):
        expected = 16 * math.prod(attrs['shape'])
        if len(attrs['hex']) != expected:
            raise serializers.ValidationError(
                {'hex': f"Expected {expected} hex digits for shape {attrs['shape']}, got {len(attrs['hex'])}."}
            )
        try:
            bytes.fromhex(attrs['hex'])
        except ValueError:
            raise serializers.ValidationError({'hex': 'Not a hexadecimal string.'})
        return attrs


class LbphParamsSerializer(serializers.Serializer):
    neighbors = serializers.IntegerField(min_value=1, max_value=24)
    radius = serializers.FloatField(min_value=0.0)
    grid = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=2, max_length=2)
    uniform = serializers.BooleanField(default=False)
    interpolation = serializers.ChoiceField(choices=['bilinear', 'nearest'], default='nearest')
    block_size = serializers.IntegerField(min_value=1, default=1)


class FaceModelSerializer(serializers.Serializer):
    version = serializers.IntegerField()
    kind = serializers.ChoiceField(choices=MODEL_KINDS)
    image_shape = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=2, max_length=2)
    class_names = serializers.ListField(child=serializers.CharField(max_length=128), min_length=1)
    gallery_labels = serializers.ListField(child=serializers.IntegerField(min_value=0))
    unknown_threshold = serializers.FloatField(allow_null=True, default=None)
    params = serializers.DictField(default=dict)
    arrays = serializers.DictField(child=ArraySerializer())

    def validate_version(self, value):
        if value not in SUPPORTED_VERSIONS:
            raise serializers.ValidationError(f"Unsupported face model version {value}.")
        return value

    def validate(self, attrs):
        missing = [name for name in REQUIRED_ARRAYS[attrs['kind']] if name not in attrs['arrays']]
        if missing:
            raise serializers.ValidationError({'arrays': f"Missing array(s): {', '.join(missing)}."})
        classes = len(attrs['class_names'])
        if any(label >= classes for label in attrs['gallery_labels']):
            raise serializers.ValidationError({'gallery_labels': f"Labels must be below the class count {classes}."})
        rows = attrs['arrays']['gallery']['shape'][0] if attrs['arrays']['gallery']['shape'] else 0
        if rows != len(attrs['gallery_labels']):
            raise serializers.ValidationError(
                {'gallery_labels': f"Gallery has {rows} entries but {len(attrs['gallery_labels'])} labels."}
            )
        if attrs['kind'] == 'lbph':
            params = LbphParamsSerializer(data=attrs['params'])
            if not params.is_valid():
                raise serializers.ValidationError({'params': params.errors})
            attrs['params'] = params.validated_data
        return attrs
