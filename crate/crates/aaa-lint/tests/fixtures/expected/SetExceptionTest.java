import org.junit.Test;
import static org.junit.Assume.assumeNotNull;

public class SetExceptionTest {
    @Test
    public void testSetException(){
        Throwable thr = buildXExp();
        assumeNotNull(thr);
        App app = new App().setExp(thr);
        assertEquals(0, app.getMsg());}
    private Throwable buildXExp(){
        return factory.makeThrowable();}
}
