package fx;

public interface Drawable {
    void draw(Canvas canvas);
}
