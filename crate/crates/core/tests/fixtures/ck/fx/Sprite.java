package fx;

public class Sprite extends Square implements Drawable {
    private Point origin;

    public Sprite(double side, Point origin) {
        super(side);
        this.origin = origin;
    }

    public void draw(Canvas canvas) {
        for (int i = 0; i < 2; i++) {
            canvas.add(this);
        }
    }

    public Point origin() {
        return origin;
    }
}
